#include "nilmodel/shadowing.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "nilmodel/errors.hpp"

namespace nilmodel {

PseudoOrbit generate_pseudo_orbit(const TorusMap& f, const Eigen::Vector2d& x0, int length, double delta,
                                  unsigned long long seed) {
  if (length < 1 || delta < 0.0) throw Error(ErrorCode::InvalidConfig, "need L >= 1 and delta >= 0");
  PseudoOrbit po;
  po.seed = seed;
  po.points.reserve(std::size_t(length) + 1);
  po.points.push_back(wrap(x0));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int i = 0; i < length; ++i) {
    Eigen::Vector2d n;
    do {
      n = {unit(rng), unit(rng)};
    } while (n.squaredNorm() >= 1.0);
    po.points.push_back(wrap(f(po.points.back()) + delta * n));
  }
  po.delta = max_jump(f, po.points);
  return po;
}

double max_jump(const TorusMap& f, const std::vector<Eigen::Vector2d>& points) {
  double m = 0.0;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) m = std::max(m, torus_distance(f(points[i]), points[i + 1]));
  return m;
}

ShadowingResult shadow(const TorusMap& f, const HyperbolicityCertificate& cert, const PseudoOrbit& po) {
  if (!cert.hyperbolic || cert.matrix != IntMatrix(f.linear())) {
    throw Error(ErrorCode::NotHyperbolic, "linear part is not certified hyperbolic");
  }
  const Eigen::Matrix2d A = f.linear_d();
  const Eigen::Matrix2d P = cert.eigenbasis();
  const Eigen::Matrix2d Pinv = P.inverse();
  const double lu = P.col(0).dot(A * P.col(0)) / P.col(0).squaredNorm();
  const double ls = P.col(1).dot(A * P.col(1)) / P.col(1).squaredNorm();

  const std::size_t n = po.points.size();
  std::vector<Eigen::Vector2d> v(n, Eigen::Vector2d::Zero());
  std::vector<Eigen::Vector2d> r(n - 1);
  std::vector<double> wu(n), ws(n);

  ShadowingResult res;
  double previous = std::numeric_limits<double>::infinity();
  constexpr int kMaxPasses = 60;
  for (int pass = 0;; ++pass) {
    double residual = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      r[i] = torus_difference(f(po.points[i] + v[i]), po.points[i + 1] + v[i + 1]);
      residual = std::max(residual, r[i].norm());
    }
    res.residual = residual;
    res.passes = pass;
    if (residual < 1e-12) break;
    if (pass == kMaxPasses || !(residual < previous)) {
      std::ostringstream os;
      os << "orbit correction stalled at residual " << residual << " after " << pass << " passes";
      throw Error(ErrorCode::NewtonDiverged, os.str());
    }
    previous = residual;

    // d_{i+1} = A d_i + r_i in eigen-coordinates.
    wu[n - 1] = 0.0;
    for (std::size_t i = n - 1; i-- > 0;) wu[i] = (wu[i + 1] - Pinv.row(0).dot(r[i])) / lu;
    ws[0] = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) ws[i + 1] = ls * ws[i] + Pinv.row(1).dot(r[i]);
    for (std::size_t i = 0; i < n; ++i) v[i] += P * Eigen::Vector2d(wu[i], ws[i]);
  }

  res.orbit.resize(n);
  res.epsilon = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    res.orbit[i] = wrap(po.points[i] + v[i]);
    res.epsilon = std::max(res.epsilon, torus_distance(res.orbit[i], po.points[i]));
  }
  res.shadow_start = res.orbit.front();
  return res;
}

double expansivity_probe(const TorusMap& f, int pairs, int horizon, const ExpansivityOptions& options) {
  if (horizon < 1 || pairs < 1) throw Error(ErrorCode::InvalidConfig, "need pairs >= 1 and horizon >= 1");
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  struct Pair {
    double d0, sep;
  };
  std::vector<Pair> stats(static_cast<std::size_t>(pairs));
  std::vector<Eigen::Vector2d> xs(stats.size()), ys(stats.size());
  for (std::size_t p = 0; p < stats.size(); ++p) {
    const double d = options.max_initial_distance * unit(rng);
    const double ang = 2.0 * std::numbers::pi * unit(rng);
    xs[p] = {unit(rng), unit(rng)};
    ys[p] = wrap(xs[p] + d * Eigen::Vector2d(std::cos(ang), std::sin(ang)));
  }
  // No two points of T^2 are farther apart than sqrt(2)/2.
  const double enough = std::sqrt(0.5) - 1e-12;
#pragma omp parallel for schedule(dynamic, 64)
  for (std::size_t p = 0; p < stats.size(); ++p) {
    const double d0 = torus_distance(xs[p], ys[p]);
    double sep = d0;
    Eigen::Vector2d a = xs[p], b = ys[p];
    for (int k = 0; k < horizon && sep < enough; ++k) {
      a = f(a);
      b = f(b);
      sep = std::max(sep, torus_distance(a, b));
    }
    a = xs[p];
    b = ys[p];
    for (int k = 0; k < horizon && sep < enough; ++k) {
      a = wrap(f.inverse_lift(a));
      b = wrap(f.inverse_lift(b));
      sep = std::max(sep, torus_distance(a, b));
    }
    stats[p] = {d0, sep};
  }
  std::sort(stats.begin(), stats.end(), [](const Pair& l, const Pair& r) { return l.d0 < r.d0; });
  // c is admissible iff c <= min{sep_p : d0_p < c}; scan the intervals
  // between consecutive initial distances.
  double best = stats.front().d0;
  double running = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < stats.size(); ++k) {
    running = std::min(running, stats[k].sep);
    const double upper = k + 1 < stats.size() ? stats[k + 1].d0 : std::numeric_limits<double>::infinity();
    if (running > stats[k].d0) best = std::max(best, std::min(running, upper));
  }
  return best;
}

namespace {

double min_orbit_distance(const TorusMap& f, Eigen::Vector2d a, Eigen::Vector2d b, bool forward) {
  double best = torus_distance(a, b);
  for (int n = 1; n <= 30; ++n) {
    a = forward ? f(a) : wrap(f.inverse_lift(a));
    b = forward ? f(b) : wrap(f.inverse_lift(b));
    best = std::min(best, torus_distance(a, b));
  }
  return best;
}

}  // namespace

IntersectionResult product_structure_intersect(const TorusMap& f, const DisplacementField& h,
                                               const Eigen::Vector2d& x, const Eigen::Vector2d& y,
                                               std::optional<Eigen::Vector2d> start) {
  const auto cert = hyperbolicity_certificate(IntMatrix(f.linear()));
  if (!cert.hyperbolic) throw Error(ErrorCode::NotHyperbolic, "linear part is not hyperbolic");
  const Eigen::Matrix2d P = cert.eigenbasis();
  const Eigen::Matrix2d Pinv = P.inverse();

  IntersectionResult out;
  const Eigen::Vector2d hx = h.apply(x), hy = h.apply(y);
  // hx + s e_s = hy + t e_u on the cover, with the nearest lift of hy.
  const Eigen::Vector2d coeff = Pinv * torus_difference(hy, hx);
  out.linear_point = wrap(hx + coeff.y() * P.col(1));

  double res = 0.0;
  const Eigen::Vector2d z = invert_displacement(h, out.linear_point, start, &res);
  out.point = wrap(z);
  out.pullback_residual = res;
  out.forward_residual = min_orbit_distance(f, out.point, wrap(x), true);
  out.backward_residual = min_orbit_distance(f, out.point, wrap(y), false);
  return out;
}

}  // namespace nilmodel
