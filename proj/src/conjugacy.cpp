#include "nilmodel/conjugacy.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "nilmodel/errors.hpp"

namespace nilmodel {

namespace {

double signed_eigenvalue(const Eigen::Matrix2d& A, const Eigen::Vector2d& v) {
  return v.dot(A * v) / v.squaredNorm();
}

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

Eigen::Vector2d DisplacementField::operator()(const Eigen::Vector2d& x) const {
  if (!refinement_ || refinement_->depth == 0 || refinement_->f.is_linear()) return grid_(x);
  const OrbitRefinement& r = *refinement_;

  // Unstable coordinate: w_u(x) = (q_u(x) + w_u(f x)) / lambda_u.
  double wu = 0.0;
  double scale = 1.0;
  Eigen::Vector2d xk = wrap(x);
  for (int k = 0; k < r.depth; ++k) {
    scale /= r.lambda_u;
    wu += scale * r.basis_inv.row(0).dot(r.f.periodic_part(xk));
    xk = wrap(r.f.lift(xk));
  }
  wu += scale * r.basis_inv.row(0).dot(grid_(xk));

  // Stable coordinate: w_s(x) = lambda_s w_s(f^-1 x) - q_s(f^-1 x).
  double ws = 0.0;
  scale = 1.0;
  Eigen::Vector2d yk = wrap(x);
  for (int k = 0; k < r.depth; ++k) {
    yk = wrap(r.f.inverse_lift(yk, 5, 1e-13));
    ws -= scale * r.basis_inv.row(1).dot(r.f.periodic_part(yk));
    scale *= r.lambda_s;
  }
  ws += scale * r.basis_inv.row(1).dot(grid_(yk));

  return r.basis * Eigen::Vector2d(wu, ws);
}

std::pair<DisplacementField, ConjugacyReport> solve_semiconjugacy(const TorusMap& f, const IntMatrix2& A,
                                                                  const HyperbolicityCertificate& cert, int n,
                                                                  double tol, const ConjugacyOptions& options) {
  if (!is_power_of_two(n) || n < 64) throw Error(ErrorCode::InvalidConfig, "N must be a power of two >= 64");
  if (!cert.hyperbolic || cert.matrix.rows() != 2 || cert.matrix != IntMatrix(A)) {
    throw Error(ErrorCode::NotHyperbolic, "certificate does not certify the target matrix");
  }
  if (induced_matrix(f) != A) throw Error(ErrorCode::DegreeMismatch, "induced_matrix(f) differs from A");

  const Eigen::Matrix2d Ad = A.cast<double>();
  auto ref = std::make_shared<OrbitRefinement>();
  ref->f = f;
  ref->basis = cert.eigenbasis();
  ref->basis_inv = ref->basis.inverse();
  ref->lambda_u = signed_eigenvalue(Ad, ref->basis.col(0));
  ref->lambda_s = signed_eigenvalue(Ad, ref->basis.col(1));
  ref->depth = options.refine_depth;
  const Eigen::Matrix2d& Pinv = ref->basis_inv;

  ConjugacyReport report;
  report.n = n;
  report.expected_rate = std::max(std::abs(ref->lambda_s), 1.0 / std::abs(ref->lambda_u));

  // Per-node data, fixed across iterations.
  const int total = n * n;
  std::vector<Eigen::Vector2d> fwd(total), bwd(total);
  std::vector<double> qu(total), qs_bwd(total);
#pragma omp parallel for schedule(static)
  for (int idx = 0; idx < total; ++idx) {
    const Eigen::Vector2d x{double(idx / n) / n, double(idx % n) / n};
    fwd[idx] = wrap(f.lift(x));
    bwd[idx] = wrap(f.inverse_lift(x, 5, 1e-13));
    qu[idx] = Pinv.row(0).dot(f.periodic_part(x));
    qs_bwd[idx] = Pinv.row(1).dot(f.periodic_part(bwd[idx]));
  }

  PeriodicGrid wu(n), ws(n);
  if (options.initial) {
    if (options.initial->size() != n) throw Error(ErrorCode::InvalidConfig, "initial guess has the wrong size");
    for (int idx = 0; idx < total; ++idx) {
      const Eigen::Vector2d w = Pinv * options.initial->at(idx / n, idx % n);
      wu.values()[idx] = w.x();
      ws.values()[idx] = w.y();
    }
  }

  PeriodicGrid wu_next(n), ws_next(n);
  bool converged = false;
  for (int it = 0; it < options.max_iterations; ++it) {
    double change = 0.0;
#pragma omp parallel for schedule(static) reduction(max : change)
    for (int idx = 0; idx < total; ++idx) {
      const double a = (qu[idx] + wu(fwd[idx])) / ref->lambda_u;
      const double b = ref->lambda_s * ws(bwd[idx]) - qs_bwd[idx];
      change = std::max({change, std::abs(a - wu.values()[idx]), std::abs(b - ws.values()[idx])});
      wu_next.values()[idx] = a;
      ws_next.values()[idx] = b;
    }
    std::swap(wu, wu_next);
    std::swap(ws, ws_next);
    report.iterations = it + 1;
    report.final_change = change;
    report.change_history.push_back(change);
    if (!std::isfinite(change) || (it > 10 && change > 1e3 * report.change_history.front() + 1.0)) break;
    if (change < tol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    std::ostringstream os;
    os << "no convergence after " << report.iterations << " iterations, last change " << report.final_change;
    throw Error(ErrorCode::NoConvergence, os.str());
  }

  // Median ratio of successive sup-changes above the round-off floor.
  {
    std::vector<double> ratios;
    const auto& ch = report.change_history;
    for (std::size_t k = 1; k < ch.size() && ch[k] > 1e-11; ++k) ratios.push_back(ch[k] / ch[k - 1]);
    if (!ratios.empty()) {
      std::nth_element(ratios.begin(), ratios.begin() + ratios.size() / 2, ratios.end());
      report.rate = ratios[ratios.size() / 2];
    }
  }

  PeriodicGrid2 u(n);
  for (int idx = 0; idx < total; ++idx) {
    const Eigen::Vector2d v = ref->basis * Eigen::Vector2d(wu.values()[idx], ws.values()[idx]);
    u.c0.values()[idx] = v.x();
    u.c1.values()[idx] = v.y();
  }
  report.sup_u = u.sup_norm();

  DisplacementField plain(u);
  DisplacementField h(std::move(u), ref);
  report.interpolated_defect = conjugacy_defect(plain, f, A, 4 * n);
  report.defect = conjugacy_defect(h, f, A, 4 * n);
  report.injectivity_margin = injectivity_probe(h, options.injectivity_samples).margin;
  return {std::move(h), report};
}

double conjugacy_defect(const DisplacementField& h, const TorusMap& f, const IntMatrix2& A, int m) {
  const Eigen::Matrix2d Ad = A.cast<double>();
  double worst = 0.0;
#pragma omp parallel for schedule(static) reduction(max : worst)
  for (int idx = 0; idx < m * m; ++idx) {
    const Eigen::Vector2d x{double(idx / m) / m, double(idx % m) / m};
    const Eigen::Vector2d lhs = Ad * h.lift(x);
    const Eigen::Vector2d rhs = h.lift(f(x));
    worst = std::max(worst, torus_distance(lhs, rhs));
  }
  return worst;
}

namespace {

/// Central differences of h at scale `step`. The limit conjugacy is only
/// Hoelder, so the useful slope depends on the scale; callers shrink the step
/// with the residual.
Eigen::Matrix2d secant_jacobian(const DisplacementField& h, const Eigen::Vector2d& x, double step) {
  Eigen::Matrix2d J;
  for (int k = 0; k < 2; ++k) {
    Eigen::Vector2d e = Eigen::Vector2d::Zero();
    e(k) = step;
    J.col(k) = (h.lift(x + e) - h.lift(x - e)) / (2.0 * step);
  }
  return J;
}

}  // namespace

Eigen::Vector2d invert_displacement(const DisplacementField& h, const Eigen::Vector2d& target,
                                    std::optional<Eigen::Vector2d> start, double* residual) {
  Eigen::Vector2d z = start ? *start : Eigen::Vector2d(target - h(target));
  double res = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 60; ++it) {
    const Eigen::Vector2d r = torus_difference(h.lift(z), target);
    res = r.norm();
    if (res < 1e-13) break;
    const double step = std::clamp(res, 1e-9, 0.5 / h.size());
    const Eigen::Matrix2d J = secant_jacobian(h, z, step);
    if (!(J.determinant() > 0.0)) throw Error(ErrorCode::PullbackFailed, "h is locally non-invertible");
    z -= J.partialPivLu().solve(r);
  }
  if (res > 1e-11) {
    std::ostringstream os;
    os << "pullback residual " << res;
    throw Error(ErrorCode::PullbackFailed, os.str());
  }
  if (residual) *residual = res;
  return wrap(z);
}

InjectivityReport injectivity_probe(const DisplacementField& h, int samples, unsigned long long seed) {
  const int n = h.size();
  InjectivityReport r;
  r.min_ratio = std::numeric_limits<double>::infinity();
  r.min_cell_area = std::numeric_limits<double>::infinity();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double min_dist = 1.0 / n;
  for (int s = 0; s < samples; ++s) {
    const Eigen::Vector2d x{unit(rng), unit(rng)};
    Eigen::Vector2d y;
    if (s % 2 == 0) {
      // Nearby pair: offset length in [1/N, 4/N].
      const double len = min_dist * (1.0 + 3.0 * unit(rng));
      const double ang = 2.0 * std::numbers::pi * unit(rng);
      y = wrap(x + len * Eigen::Vector2d(std::cos(ang), std::sin(ang)));
    } else {
      do {
        y = {unit(rng), unit(rng)};
      } while (torus_distance(x, y) < min_dist);
    }
    const double d = torus_distance(x, y);
    r.min_ratio = std::min(r.min_ratio, torus_distance(h.apply(x), h.apply(y)) / d);
  }

  const PeriodicGrid2& g = h.grid();
  auto corner = [&](int i, int j) -> Eigen::Vector2d {
    return Eigen::Vector2d(double(i) / n, double(j) / n) + g.at(i, j);
  };
  const double cell = 1.0 / (double(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Eigen::Vector2d p00 = corner(i, j), p10 = corner(i + 1, j), p11 = corner(i + 1, j + 1),
                            p01 = corner(i, j + 1);
      auto area2 = [](const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
        const Eigen::Vector2d e = b - a, f = c - a;
        return e.x() * f.y() - e.y() * f.x();
      };
      r.min_cell_area = std::min({r.min_cell_area, area2(p00, p10, p11) / cell, area2(p00, p11, p01) / cell});
    }
  }
  r.margin = std::min(r.min_ratio, r.min_cell_area);
  return r;
}

}  // namespace nilmodel
