#include "nilmodel/fibered.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "nilmodel/errors.hpp"

namespace nilmodel {

bool FiberedMapSpec::has_perturbation() const {
  const bool base = base_eps != 0.0 && !(base_modes[0].empty() && base_modes[1].empty());
  const bool fiber = fiber_eps != 0.0 && !fiber_modes.empty();
  return base || fiber;
}

HeisD FiberedMapSpec::perturbation(const Eigen::Vector2d& base) const {
  return {base_eps * base_modes[0].value(base), base_eps * base_modes[1].value(base),
          fiber_eps * fiber_modes.value(base)};
}

HeisD evaluate_lift(const FiberedMapSpec& f, const HeisD& g) {
  const HeisD core = apply(f.core, g);
  if (!f.has_perturbation()) return core;
  return f.perturbation({g.x, g.y}) * core;
}

NilPoint evaluate(const FiberedMapSpec& f, const NilPoint& p) {
  const HeisQ core = apply(f.core, p.rep());
  if (!f.has_perturbation()) return to_nil(core);
  const HeisD P = f.perturbation({p.rep().x.get_d(), p.rep().y.get_d()});
  return to_nil(exact(P) * core);
}

FiberedMapSpec make_fibered_map(FiberedMapSpec spec) {
  for (const auto* s : {&spec.base_modes[0], &spec.base_modes[1], &spec.fiber_modes}) {
    for (const auto& m : s->modes) {
      if (std::abs(m.kx) > FourierSeries::kMaxDegree || std::abs(m.ky) > FourierSeries::kMaxDegree) {
        throw Error(ErrorCode::InvalidConfig, "perturbation degree above 4");
      }
    }
  }
  std::mt19937_64 rng(0xf1be7edULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> shift(-3, 3);
  for (int k = 0; k < 64; ++k) {
    const HeisD g{unit(rng), unit(rng), 0.5 * unit(rng)};
    const HeisD gamma{double(shift(rng)), double(shift(rng)), 0.5 * shift(rng)};
    const HeisD a = reduce_numeric(evaluate_lift(spec, g));
    const HeisD b = reduce_numeric(evaluate_lift(spec, g * gamma));
    const Eigen::Vector3d d{a.x - b.x, a.y - b.y, 2.0 * (a.z - b.z)};
    // Compare on the circle factors; values straddling a cut count as equal.
    double worst = 0.0;
    for (int i = 0; i < 3; ++i) worst = std::max(worst, std::abs(d(i) - std::round(d(i))));
    if (worst > 1e-8) {
      std::ostringstream os;
      os << "f(g*gamma) and f(g) differ by " << worst << " after reduction";
      throw Error(ErrorCode::NotEquivariant, os.str());
    }
  }
  const double det = induced_base_map(spec).min_jacobian_determinant(64);
  if (det < 1e-3) throw Error(ErrorCode::InvalidConfig, "base perturbation is not a diffeomorphism");
  return spec;
}

Eigen::Matrix3d jacobian_coords(const FiberedMapSpec& f, const HeisD& g) {
  const auto& M = f.core.M;
  const auto& q = f.core.poly;
  const double a = double(M(0, 0)), b = double(M(0, 1)), c = double(M(1, 0)), d = double(M(1, 1));
  Eigen::Matrix3d J;
  J << a, b, 0.0,
       c, d, 0.0,
       2.0 * q.xx.get_d() * g.x + q.xy.get_d() * g.y + q.x1.get_d(),
       2.0 * q.yy.get_d() * g.y + q.xy.get_d() * g.x + q.y1.get_d(),
       q.zz.get_d();
  if (!f.has_perturbation()) return J;

  const Eigen::Vector2d base{g.x, g.y};
  const HeisD P = f.perturbation(base);
  const Eigen::Vector2d dPx = f.base_eps * f.base_modes[0].gradient(base);
  const Eigen::Vector2d dPy = f.base_eps * f.base_modes[1].gradient(base);
  const Eigen::Vector2d dPz = f.fiber_eps * f.fiber_modes.gradient(base);
  const double Y = c * g.x + d * g.y;
  // f = (Px + X, Py + Y, Pz + Z + Px*Y).
  const Eigen::RowVector3d dY{c, d, 0.0};
  J.row(2) += Eigen::RowVector3d{dPz.x(), dPz.y(), 0.0} + Y * Eigen::RowVector3d{dPx.x(), dPx.y(), 0.0} +
              P.x * dY;
  J.row(0) += Eigen::RowVector3d{dPx.x(), dPx.y(), 0.0};
  J.row(1) += Eigen::RowVector3d{dPy.x(), dPy.y(), 0.0};
  return J;
}

Eigen::Matrix3d jacobian_frame(const FiberedMapSpec& f, const HeisD& g) {
  const HeisD fg = evaluate_lift(f, g);
  Eigen::Matrix3d frame_in = Eigen::Matrix3d::Identity();
  frame_in(2, 0) = g.y;
  Eigen::Matrix3d frame_out_inv = Eigen::Matrix3d::Identity();
  frame_out_inv(2, 0) = -fg.y;
  return frame_out_inv * jacobian_coords(f, g) * frame_in;
}

Eigen::Matrix3d jacobian_frame(const FiberedMapSpec& f, const NilPoint& p) {
  return jacobian_frame(f, to_double(p.rep()));
}

TorusMap induced_base_map(const FiberedMapSpec& f) {
  return TorusMap(f.core.M, f.base_modes, f.base_eps);
}

ConeParams ConeParams::from_certificate(const HyperbolicityCertificate& cert, double aperture) {
  ConeParams c;
  c.aperture_u = aperture;
  c.aperture_s = aperture;
  c.axis_u = cert.unstable_basis.col(0).head<2>();
  c.axis_s = cert.stable_basis.col(0).head<2>();
  return c;
}

double PHReport::worst_margin() const {
  return std::min({margin_unstable_cone, margin_stable_cone, margin_expansion, margin_contraction,
                   margin_unstable_over_center, margin_center_over_stable});
}

namespace {

struct ConeStats {
  double min_expansion = std::numeric_limits<double>::infinity();
  double max_angle = 0.0;
};

/// Image statistics of L on the cone of aperture alpha around the horizontal
/// lift of axis; the image angle is measured against the same axis.
ConeStats cone_stats(const Eigen::Matrix3d& L, const Eigen::Vector2d& axis2, double alpha) {
  const Eigen::Vector3d u = Eigen::Vector3d(axis2.x(), axis2.y(), 0.0).normalized();
  const Eigen::Vector3d w1 = Eigen::Vector3d(-u.y(), u.x(), 0.0);
  const Eigen::Vector3d w2 = Eigen::Vector3d::UnitZ();
  const double tan_a = std::tan(alpha);
  constexpr int kAngles = 48;
  ConeStats s;
  for (double r : {0.0, 0.5 * tan_a, tan_a}) {
    for (int k = 0; k < (r == 0.0 ? 1 : kAngles); ++k) {
      const double t = 2.0 * std::numbers::pi * k / kAngles;
      const Eigen::Vector3d v = u + r * (std::cos(t) * w1 + std::sin(t) * w2);
      const Eigen::Vector3d Lv = L * v;
      s.min_expansion = std::min(s.min_expansion, Lv.norm() / v.norm());
      const double along = std::abs(Lv.dot(u));
      const double perp = (Lv - Lv.dot(u) * u).norm();
      s.max_angle = std::max(s.max_angle, std::atan2(perp, along));
    }
  }
  return s;
}

}  // namespace

PHReport verify_partial_hyperbolicity(const FiberedMapSpec& f, const ConeParams& cones, int grid_n) {
  if (grid_n < 8) throw Error(ErrorCode::InvalidConfig, "grid_n must be at least 8");
  const int total = grid_n * grid_n * grid_n;
  struct PointStats {
    ConeStats u, s;
    double center_fwd = 0.0;
    double center_bwd = 0.0;
  };
  std::vector<PointStats> stats(static_cast<std::size_t>(total));

#pragma omp parallel for schedule(static)
  for (int idx = 0; idx < total; ++idx) {
    const int i = idx / (grid_n * grid_n);
    const int j = (idx / grid_n) % grid_n;
    const int k = idx % grid_n;
    const HeisD p{double(i) / grid_n, double(j) / grid_n, 0.5 * double(k) / grid_n};
    const Eigen::Matrix3d J = jacobian_frame(f, p);
    const Eigen::Matrix3d Jinv = J.inverse();
    PointStats& st = stats[static_cast<std::size_t>(idx)];
    st.u = cone_stats(J, cones.axis_u, cones.aperture_u);
    st.s = cone_stats(Jinv, cones.axis_s, cones.aperture_s);
    st.center_fwd = (J * Eigen::Vector3d::UnitZ()).norm();
    st.center_bwd = (Jinv * Eigen::Vector3d::UnitZ()).norm();
  }

  PHReport r;
  r.grid_n = grid_n;
  r.min_unstable_expansion = std::numeric_limits<double>::infinity();
  double min_stable_inverse_expansion = std::numeric_limits<double>::infinity();
  r.min_center_rate = std::numeric_limits<double>::infinity();
  r.max_center_rate = 0.0;
  for (const auto& st : stats) {
    r.min_unstable_expansion = std::min(r.min_unstable_expansion, st.u.min_expansion);
    min_stable_inverse_expansion = std::min(min_stable_inverse_expansion, st.s.min_expansion);
    r.max_unstable_angle = std::max(r.max_unstable_angle, st.u.max_angle);
    r.max_stable_angle = std::max(r.max_stable_angle, st.s.max_angle);
    r.min_center_rate = std::min({r.min_center_rate, st.center_fwd, 1.0 / st.center_bwd});
    r.max_center_rate = std::max({r.max_center_rate, st.center_fwd, 1.0 / st.center_bwd});
  }
  r.max_stable_contraction = 1.0 / min_stable_inverse_expansion;
  r.margin_unstable_cone = cones.aperture_u - r.max_unstable_angle;
  r.margin_stable_cone = cones.aperture_s - r.max_stable_angle;
  r.margin_expansion = r.min_unstable_expansion - 1.0;
  r.margin_contraction = 1.0 - r.max_stable_contraction;
  r.margin_unstable_over_center = r.min_unstable_expansion - r.max_center_rate;
  r.margin_center_over_stable = r.min_center_rate - r.max_stable_contraction;
  r.pass = r.worst_margin() > 0.0;
  return r;
}

}  // namespace nilmodel
