#include "nilmodel/graph_transform.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "nilmodel/errors.hpp"

namespace nilmodel {

namespace {

Eigen::Matrix3d basis_matrix(const Eigen::Vector3d& u, const Eigen::Vector3d& s) {
  Eigen::Matrix3d B;
  B.col(0) = u;
  B.col(1) = s;
  B.col(2) = Eigen::Vector3d::UnitZ();
  return B;
}

Eigen::Matrix3d frame_jacobian_at(const FiberedMapSpec& f, const Eigen::Vector2d& p) {
  return jacobian_frame(f, HeisD{p.x(), p.y(), 0.0});
}

double median_ratio(const std::vector<double>& changes) {
  std::vector<double> ratios;
  for (std::size_t k = 1; k < changes.size(); ++k) {
    if (changes[k - 1] > 1e-13 && changes[k] > 1e-13) ratios.push_back(changes[k] / changes[k - 1]);
  }
  if (ratios.empty()) return 0.0;
  std::nth_element(ratios.begin(), ratios.begin() + std::ptrdiff_t(ratios.size() / 2), ratios.end());
  return ratios[ratios.size() / 2];
}

template <typename Step>
std::pair<SectionField, GraphTransformReport> iterate_to_fixed_point(const BlockDecomposition& blocks, double tol,
                                                                     int max_iterations, Step step) {
  GraphTransformReport r;
  r.n = blocks.n;
  r.lambda_inv = blocks.contraction_bound();
  if (!(r.lambda_inv < 1.0)) {
    std::ostringstream os;
    os << "graph transform bound sup|K| sup|A^-1| = " << r.lambda_inv << " is not below 1";
    throw Error(ErrorCode::NotContracting, os.str());
  }
  SectionField sigma(blocks.n);
  for (int it = 1; it <= max_iterations; ++it) {
    SectionField next = step(sigma);
    const double change = sup_distance(next.values, sigma.values);
    r.change_history.push_back(change);
    sigma = std::move(next);
    r.iterations = it;
    if (change < tol) {
      r.final_change = change;
      r.rate = median_ratio(r.change_history);
      r.sup_sigma = sigma.sup_norm();
      r.residual = sup_distance(step(sigma).values, sigma.values);
      return {std::move(sigma), r};
    }
  }
  throw Error(ErrorCode::NoConvergence, "graph transform did not reach the tolerance");
}

}  // namespace

Blocks BlockDecomposition::at(const Eigen::Vector2d& p) const {
  const Eigen::Matrix3d B = basis_matrix(lift_u, lift_s);
  const Eigen::Matrix3d M = B.inverse() * frame_jacobian_at(map, p) * B;
  return {M(0, 0), M(1, 1), M(2, 0), M(2, 1), M(2, 2)};
}

Eigen::Vector2d BlockDecomposition::preimage(const Eigen::Vector2d& q) const {
  if (base.is_linear()) {
    const IntMatrix2& A = base.linear();
    const long long det = A(0, 0) * A(1, 1) - A(0, 1) * A(1, 0);
    IntMatrix2 inv;
    inv << det * A(1, 1), -det * A(0, 1), -det * A(1, 0), det * A(0, 0);
    return wrap(inv.cast<double>() * q);
  }
  return wrap(base.inverse_lift(q));
}

Eigen::Vector2d BlockDecomposition::image(const Eigen::Vector2d& p) const { return base(p); }

double BlockDecomposition::contraction_bound() const {
  double sup_k = 0.0, sup_inv_a = 0.0;
  for (std::size_t i = 0; i < k.values().size(); ++i) {
    sup_k = std::max(sup_k, std::abs(k.values()[i]));
    sup_inv_a = std::max(sup_inv_a, 1.0 / std::abs(a_u.values()[i]));
  }
  return sup_k * sup_inv_a;
}

BlockDecomposition block_decompose(const FiberedMapSpec& g, const ConnectionSpec& conn,
                                   const HyperbolicityCertificate& base_cert, int n) {
  if (base_cert.matrix.rows() != 2 || !base_cert.hyperbolic) {
    throw Error(ErrorCode::NotCertified, "graph transform needs a certified hyperbolic 2x2 base");
  }
  if (n < 8) throw Error(ErrorCode::InvalidConfig, "graph transform grid must be at least 8 x 8");
  BlockDecomposition b;
  b.map = g;
  b.connection = conn;
  b.base = induced_base_map(g);
  b.n = n;
  b.e_u = base_cert.unstable_basis.col(0).normalized();
  b.e_s = base_cert.stable_basis.col(0).normalized();
  b.lift_u = conn.lift(b.e_u);
  b.lift_s = conn.lift(b.e_s);
  b.lambda_u = base_cert.lambda;
  b.lambda_s = base_cert.lambda_s;

  b.a_u = b.a_s = b.c_u = b.c_s = b.k = PeriodicGrid(n);
  const Eigen::Matrix3d B = basis_matrix(b.lift_u, b.lift_s);
  const Eigen::Matrix3d Binv = B.inverse();
  double upper = 0.0, cross = 0.0, reassembly = 0.0;
#pragma omp parallel for schedule(static) reduction(max : upper, cross, reassembly)
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Eigen::Vector2d p = b.a_u.node(i, j);
      const Eigen::Matrix3d J = frame_jacobian_at(g, p);
      const Eigen::Matrix3d M = Binv * J * B;
      upper = std::max({upper, std::abs(M(0, 2)), std::abs(M(1, 2))});
      cross = std::max({cross, std::abs(M(0, 1)), std::abs(M(1, 0))});
      Eigen::Matrix3d blocks = Eigen::Matrix3d::Zero();
      blocks(0, 0) = M(0, 0);
      blocks(1, 1) = M(1, 1);
      blocks.row(2) = M.row(2);
      reassembly = std::max(reassembly, (B * blocks * Binv - J).cwiseAbs().maxCoeff());
      b.a_u.at(i, j) = M(0, 0);
      b.a_s.at(i, j) = M(1, 1);
      b.c_u.at(i, j) = M(2, 0);
      b.c_s.at(i, j) = M(2, 1);
      b.k.at(i, j) = M(2, 2);
    }
  }
  b.upper_right = upper;
  b.cross = cross;
  b.reassembly = reassembly;
  if (upper > 1e-12) throw Error(ErrorCode::NotFibered, "derivative moves the fiber direction off the fiber");
  if (cross > 1e-10) {
    throw Error(ErrorCode::InvalidConfig, "base map does not preserve its eigendirections (nonlinear base)");
  }
  for (double a : b.a_u.values()) {
    if (!(std::abs(a) > 1e-12)) throw Error(ErrorCode::InvalidConfig, "singular unstable block");
  }
  for (double k : b.k.values()) {
    if (!(std::abs(k) > 1e-12)) throw Error(ErrorCode::InvalidConfig, "singular fiber block");
  }
  return b;
}

SectionField transform_step(const SectionField& sigma, const BlockDecomposition& blocks) {
  const int n = sigma.size();
  SectionField out(n);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Eigen::Vector2d p = blocks.preimage(out.values.node(i, j));
      out.values.at(i, j) = (blocks.c_u(p) + blocks.k(p) * sigma(p)) / blocks.a_u(p);
    }
  }
  return out;
}

SectionField stable_transform_step(const SectionField& tau, const BlockDecomposition& blocks) {
  const int n = tau.size();
  SectionField out(n);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Eigen::Vector2d p = out.values.node(i, j);
      const Eigen::Vector2d gp = blocks.image(p);
      out.values.at(i, j) = (blocks.a_s.at(i, j) * tau(gp) - blocks.c_s.at(i, j)) / blocks.k.at(i, j);
    }
  }
  return out;
}

std::pair<SectionField, GraphTransformReport> solve_unstable_section(const BlockDecomposition& blocks, double tol,
                                                                     int max_iterations) {
  return iterate_to_fixed_point(blocks, tol, max_iterations,
                                [&](const SectionField& s) { return transform_step(s, blocks); });
}

std::pair<SectionField, GraphTransformReport> solve_stable_section(const BlockDecomposition& blocks, double tol,
                                                                   int max_iterations) {
  return iterate_to_fixed_point(blocks, tol, max_iterations,
                                [&](const SectionField& s) { return stable_transform_step(s, blocks); });
}

double step_lipschitz(const BlockDecomposition& blocks, int pairs, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < pairs; ++k) {
    SectionField a(blocks.n), b(blocks.n);
    for (double& v : a.values.values()) v = unit(rng);
    for (double& v : b.values.values()) v = unit(rng);
    const double before = sup_distance(a.values, b.values);
    const double after = sup_distance(transform_step(a, blocks).values, transform_step(b, blocks).values);
    worst = std::max(worst, after / before);
  }
  return worst;
}

OracleReport power_iteration_oracle(const BlockDecomposition& blocks, const SectionField& sigma_u, int steps) {
  OracleReport r;
  const int n = sigma_u.size();
  r.points = n * n;
  r.steps = steps;
  const Eigen::Vector3d start(blocks.e_u.x(), blocks.e_u.y(), 0.3);
  double worst = 0.0;
#pragma omp parallel for schedule(static) reduction(max : worst)
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Eigen::Vector2d q = sigma_u.values.node(i, j);
      std::vector<Eigen::Vector2d> orbit{q};
      for (int k = 0; k < steps; ++k) orbit.push_back(blocks.preimage(orbit.back()));
      Eigen::Vector3d v = start;
      for (int k = steps; k >= 1; --k) {
        v = frame_jacobian_at(blocks.map, orbit[std::size_t(k)]) * v;
        v.normalize();
      }
      const Eigen::Vector3d w = blocks.lift_u + sigma_u.values.at(i, j) * Eigen::Vector3d::UnitZ();
      worst = std::max(worst, std::asin(std::min(1.0, v.cross(w).norm() / w.norm())));
    }
  }
  r.max_angle = worst;
  return r;
}

SplittingReport verify_splitting_rates(const BlockDecomposition& blocks, const SectionField& sigma_u,
                                       const SectionField& sigma_s, double tol) {
  SplittingReport r;
  const int n = sigma_u.size();
  r.n = n;
  const Eigen::Vector3d Z = Eigen::Vector3d::UnitZ();
  double min_u = 1e300, max_u = 0.0, min_s = 1e300, max_s = 0.0, min_c = 1e300, max_c = 0.0, inv = 0.0;
#pragma omp parallel for schedule(static) reduction(min : min_u, min_s, min_c) reduction(max : max_u, max_s, max_c, inv)
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Eigen::Vector2d p = sigma_u.values.node(i, j);
      const Eigen::Vector2d gp = blocks.image(p);
      const Eigen::Matrix3d J = frame_jacobian_at(blocks.map, p);
      Eigen::Matrix3d at_gp;
      at_gp.col(0) = blocks.lift_u + sigma_u(gp) * Z;
      at_gp.col(1) = blocks.lift_s + sigma_s(gp) * Z;
      at_gp.col(2) = Z;
      Eigen::Matrix3d at_p;
      at_p.col(0) = blocks.lift_u + sigma_u.values.at(i, j) * Z;
      at_p.col(1) = blocks.lift_s + sigma_s.values.at(i, j) * Z;
      at_p.col(2) = Z;
      // Column c: Dg of bundle c at p in the bundle basis at g(p); the
      // adapted norms make every basis vector unit length.
      const Eigen::Matrix3d M = at_gp.inverse() * J * at_p;
      const double u = std::abs(M(0, 0)), s = std::abs(M(1, 1)), c = std::abs(M(2, 2));
      min_u = std::min(min_u, u);
      max_u = std::max(max_u, u);
      min_s = std::min(min_s, s);
      max_s = std::max(max_s, s);
      min_c = std::min(min_c, c);
      max_c = std::max(max_c, c);
      inv = std::max({inv, std::abs(M(1, 0)), std::abs(M(2, 0)), std::abs(M(0, 1)), std::abs(M(2, 1)),
                      std::abs(M(0, 2)), std::abs(M(1, 2))});
    }
  }
  r.min_unstable = min_u;
  r.max_unstable = max_u;
  r.min_stable = min_s;
  r.max_stable = max_s;
  r.min_center = min_c;
  r.max_center = max_c;
  r.invariance = inv;
  r.pass = min_u >= blocks.lambda_u - tol && max_s <= blocks.lambda_s + tol && std::abs(min_c - 1.0) <= tol &&
           std::abs(max_c - 1.0) <= tol && inv < 1e-8;
  return r;
}

}  // namespace nilmodel
