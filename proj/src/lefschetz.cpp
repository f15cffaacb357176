#include "nilmodel/lefschetz.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <sstream>

#include "nilmodel/errors.hpp"

namespace nilmodel {

std::vector<long long> SmithNormalForm::diagonal() const {
  std::vector<long long> d;
  for (Eigen::Index i = 0; i < std::min(D.rows(), D.cols()); ++i) d.push_back(D(i, i));
  return d;
}

namespace {

void add_row(IntMatrix& M, Eigen::Index dst, Eigen::Index src, long long k) { M.row(dst) += k * M.row(src); }
void add_col(IntMatrix& M, Eigen::Index dst, Eigen::Index src, long long k) { M.col(dst) += k * M.col(src); }

}  // namespace

SmithNormalForm smith_normal_form(const IntMatrix& M) {
  const Eigen::Index r = M.rows(), c = M.cols();
  IntMatrix D = M;
  IntMatrix U = IntMatrix::Identity(r, r);
  IntMatrix V = IntMatrix::Identity(c, c);

  for (Eigen::Index t = 0; t < std::min(r, c); ++t) {
    while (true) {
      // Pivot: least nonzero |entry| of the trailing block.
      Eigen::Index pi = -1, pj = -1;
      for (Eigen::Index i = t; i < r; ++i) {
        for (Eigen::Index j = t; j < c; ++j) {
          if (D(i, j) != 0 && (pi < 0 || std::llabs(D(i, j)) < std::llabs(D(pi, pj)))) {
            pi = i;
            pj = j;
          }
        }
      }
      if (pi < 0) break;
      D.row(t).swap(D.row(pi));
      U.row(t).swap(U.row(pi));
      D.col(t).swap(D.col(pj));
      V.col(t).swap(V.col(pj));

      bool clean = true;
      for (Eigen::Index i = t + 1; i < r; ++i) {
        const long long q = D(i, t) / D(t, t);
        add_row(D, i, t, -q);
        add_row(U, i, t, -q);
        if (D(i, t) != 0) clean = false;
      }
      for (Eigen::Index j = t + 1; j < c; ++j) {
        const long long q = D(t, j) / D(t, t);
        add_col(D, j, t, -q);
        add_col(V, j, t, -q);
        if (D(t, j) != 0) clean = false;
      }
      if (!clean) continue;

      // Divisibility: fold an offending row into the pivot row and repeat.
      Eigen::Index bad = -1;
      for (Eigen::Index i = t + 1; i < r && bad < 0; ++i) {
        for (Eigen::Index j = t + 1; j < c; ++j) {
          if (D(i, j) % D(t, t) != 0) {
            bad = i;
            break;
          }
        }
      }
      if (bad < 0) break;
      add_row(D, t, bad, 1);
      add_row(U, t, bad, 1);
    }
    if (D(t, t) < 0) {
      D.row(t) *= -1;
      U.row(t) *= -1;
    }
  }

  if (U * M * V != D) throw Error(ErrorCode::InvalidConfig, "Smith normal form reconstruction failed");
  return {U, V, D};
}

long long lefschetz_number(const IntMatrix& A, int m) {
  const IntMatrix I = IntMatrix::Identity(A.rows(), A.cols());
  return determinant(I - matrix_power(A, m));
}

std::vector<BasePoint> enumerate_fixed_points(const IntMatrix& A, int m) {
  if (A.rows() != 2 || A.cols() != 2) throw Error(ErrorCode::InvalidConfig, "enumeration is implemented on T^2");
  const IntMatrix Am = matrix_power(A, m);
  const IntMatrix B = Am - IntMatrix::Identity(2, 2);
  if (determinant(B) == 0) {
    std::ostringstream os;
    os << "det(A^" << m << " - I) = 0";
    throw Error(ErrorCode::SingularAtM, os.str());
  }
  const SmithNormalForm snf = smith_normal_form(B);
  const auto d = snf.diagonal();

  // B x in Z^2 iff D (V^-1 x) in Z^2, so x = V (k_1/d_1, k_2/d_2).
  std::vector<BasePoint> points;
  points.reserve(std::size_t(d[0] * d[1]));
  for (long long k1 = 0; k1 < d[0]; ++k1) {
    for (long long k2 = 0; k2 < d[1]; ++k2) {
      const Rational y1 = make_rational(k1, d[0]), y2 = make_rational(k2, d[1]);
      BasePoint p;
      p.u = frac(make_rational(snf.V(0, 0)) * y1 + make_rational(snf.V(0, 1)) * y2);
      p.v = frac(make_rational(snf.V(1, 0)) * y1 + make_rational(snf.V(1, 1)) * y2);
      const Rational iu = make_rational(Am(0, 0)) * p.u + make_rational(Am(0, 1)) * p.v - p.u;
      const Rational iv = make_rational(Am(1, 0)) * p.u + make_rational(Am(1, 1)) * p.v - p.v;
      if (iu.get_den() != 1 || iv.get_den() != 1) {
        throw Error(ErrorCode::InvalidConfig, "enumerated point is not fixed by A^m");
      }
      points.push_back(p);
    }
  }
  std::sort(points.begin(), points.end(), [](const BasePoint& a, const BasePoint& b) {
    return a.u != b.u ? a.u < b.u : a.v < b.v;
  });
  return points;
}

LefschetzReport lefschetz_report(const IntMatrix& A, int m) {
  LefschetzReport r;
  r.m = m;
  r.lefschetz = lefschetz_number(A, m);
  r.fixed_points = enumerate_fixed_points(A, m);
  r.count = static_cast<long long>(r.fixed_points.size());
  Eigen::EigenSolver<Eigen::MatrixXd> es(A.cast<double>());
  r.eigen_product = 1.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    r.eigen_product *= std::abs(1.0 - std::pow(es.eigenvalues()(i), m));
  }
  return r;
}

namespace {

/// Lift of f^m at x together with its derivative.
Eigen::Vector2d iterate(const TorusMap& f, Eigen::Vector2d x, int m, Eigen::Matrix2d& D) {
  D.setIdentity();
  for (int k = 0; k < m; ++k) {
    D = f.jacobian(x) * D;
    x = f.lift(x);
  }
  return x;
}

}  // namespace

PeriodicRefinement refine_periodic_points(const TorusMap& f, const IntMatrix2& A, const DisplacementField& h,
                                          int m) {
  PeriodicRefinement out;
  out.m = m;
  out.expected = std::llabs(lefschetz_number(IntMatrix(A), m));
  const auto exact = enumerate_fixed_points(IntMatrix(A), m);
  const double radius = std::max(3.0 * h.sup_norm(), 1e-9);

  std::vector<Eigen::Vector2d> found(exact.size());
  std::vector<double> residuals(exact.size(), -1.0);
  out.seeds.resize(exact.size());
  for (std::size_t k = 0; k < exact.size(); ++k) {
    out.seeds[k] = invert_displacement(h, exact[k].to_vector());
  }

#pragma omp parallel for schedule(dynamic)
  for (std::size_t k = 0; k < exact.size(); ++k) {
    const Eigen::Vector2d seed = out.seeds[k];
    Eigen::Vector2d x = seed;
    for (int it = 0; it < 40; ++it) {
      Eigen::Matrix2d D;
      const Eigen::Vector2d r = torus_difference(iterate(f, x, m, D), x);
      if (r.norm() < 1e-13 || (it >= 6 && r.norm() < 1e-12)) {
        residuals[k] = r.norm();
        break;
      }
      x -= (D - Eigen::Matrix2d::Identity()).partialPivLu().solve(r);
      if (torus_distance(wrap(x), seed) > radius) break;
    }
    if (residuals[k] >= 0.0) found[k] = wrap(x);
  }

  for (std::size_t k = 0; k < exact.size(); ++k) {
    if (residuals[k] < 0.0) {
      ++out.lost_seeds;
      continue;
    }
    const bool duplicate = std::any_of(out.points.begin(), out.points.end(), [&](const Eigen::Vector2d& p) {
      return torus_distance(p, found[k]) < 1e-9;
    });
    if (duplicate) continue;
    out.points.push_back(found[k]);
    out.max_residual = std::max(out.max_residual, residuals[k]);
  }
  if (static_cast<long long>(out.points.size()) != out.expected) {
    std::ostringstream os;
    os << "m = " << m << ": found " << out.points.size() << " periodic points, expected " << out.expected << " ("
       << out.lost_seeds << " seeds lost)";
    throw Error(ErrorCode::CountMismatch, os.str());
  }
  return out;
}

}  // namespace nilmodel
