#pragma once

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nilmodel/automorphism.hpp"
#include "nilmodel/circle.hpp"
#include "nilmodel/conjugacy.hpp"
#include "nilmodel/fibered.hpp"
#include "nilmodel/heis.hpp"
#include "nilmodel/rational.hpp"

namespace nilmodel {

/// Half-open rectangle [x0, x0 + w) x [y0, y0 + h) on T^2 (w, h < 1).
/// Local coordinates are the unwrapped representatives inside the rectangle.
struct Chart {
  Rational x0, y0, w, h;
};

/// Rectangle cover of T^2.
class Cover {
 public:
  Cover() = default;
  explicit Cover(std::vector<Chart> charts);

  /// The four charts J_a x J_b, J_0 = [0, 1/2 + m), J_1 = [1/2, 1 + m),
  /// chart index a + 2b.
  static Cover standard(const Rational& margin = make_rational(1, 8));

  int size() const { return static_cast<int>(charts_.size()); }
  const Chart& chart(int i) const { return charts_[std::size_t(i)]; }
  const std::vector<Chart>& charts() const { return charts_; }

  bool contains(int i, const Eigen::Vector2d& x) const;
  bool contains(int i, const BasePoint& x) const;
  /// Unwrapped coordinates of x in chart i (x must lie in the chart).
  Eigen::Vector2d local(int i, const Eigen::Vector2d& x) const;
  BasePoint local(int i, const BasePoint& x) const;
  /// Distance from x to the complement of chart i (0 outside).
  double depth(int i, const Eigen::Vector2d& x) const;

  /// Least chart index containing x.
  int canonical(const Eigen::Vector2d& x) const;
  /// Chart in which x lies deepest.
  int deepest(const Eigen::Vector2d& x) const;
  std::vector<int> charts_containing(const Eigen::Vector2d& x) const;

  /// Smooth partition of unity subordinate to the cover.
  std::vector<double> partition_of_unity(const Eigen::Vector2d& x) const;

 private:
  std::vector<Chart> charts_;
};

/// Transition data tau_ij(x): fiber coordinate in chart j -> chart i.
struct CircleCocycle {
  Cover cover;
  std::function<CircleDiffeo(int i, int j, const Eigen::Vector2d& x)> map;
  /// Exact rotation amount mod 1 at rational points, when available.
  std::function<Rational(int i, int j, const BasePoint& x)> exact_rotation;
  std::string kind;

  CircleDiffeo operator()(int i, int j, const Eigen::Vector2d& x) const { return map(i, j, x); }
  bool rotation_valued() const { return static_cast<bool>(exact_rotation) || kind == "rotation"; }
};

/// Trivial bundle: every transition is the identity.
CircleCocycle identity_cocycle(const Cover& cover);

/// tau_ij(x)(t) = t + k xi_j (eta_i - eta_j) with (xi_j, eta_j) the local
/// coordinates of x in chart j. For k = 2 and t = 2z this is the cocycle of
/// the fibration H/Gamma -> T^2 (coset representatives taken inside charts).
CircleCocycle twist_cocycle(const Cover& cover, int k);

struct CocycleCheck {
  double cocycle = 0.0;   // tau_ij tau_jk vs tau_ik
  double identity = 0.0;  // tau_ii vs id
  double inverse = 0.0;   // tau_ij tau_ji vs id
  double max() const { return std::max({cocycle, identity, inverse}); }
};

CocycleCheck check_cocycle(const CircleCocycle& tau, int samples, unsigned long long seed = 17);

/// Exact residual at random rational points; requires exact_rotation.
Rational check_cocycle_exact(const CircleCocycle& tau, int samples, unsigned long long seed = 19);

/// t_i(x) for x in chart i.
using Coboundary = std::function<CircleDiffeo(int i, const Eigen::Vector2d& x)>;

/// tau'_ij = t_i^-1 o tau_ij o t_j.
CircleCocycle apply_coboundary(const CircleCocycle& tau, Coboundary t);
Coboundary inverse_coboundary(Coboundary t);

/// max over samples of dist(a_ij(x)(t), b_ij(x)(t)).
double cocycle_distance(const CircleCocycle& a, const CircleCocycle& b, int samples, unsigned long long seed = 23);

struct Reduction {
  Coboundary t;
  CircleCocycle rotations;
  double residual = 0.0;  // apply_coboundary(tau, t) vs rotations
};

/// Structure-group reduction to rotations. With a partition of unity
/// {phi_k}, G_i = sum_k phi_k (tau_ki - tau_ki(0)) satisfies
/// G_i o tau_ij = R_ij o G_j for rotations R_ij, so t_i = G_i^-1 works.
/// Throws ReductionDiverged when the result is not rotation-valued to 1e-8.
Reduction reduce_to_rotations(const CircleCocycle& tau, int samples = 2000);

/// Euler number of a (near-)rotation cocycle from lattice plaquette holonomy.
int euler_number(const CircleCocycle& tau);

/// Rotation coboundary b with rot_b = tau_b + b_i - b_j, built as
/// b_i = sum_l phi_l d_il from the difference d = a - b. `residual` is the
/// worst failure of that identity; a nonzero integer Cech class shows up as
/// a residual near 1/2. Both cocycles must share the cover.
struct RotationCoboundary {
  std::function<double(int i, const Eigen::Vector2d& x)> b;
  double residual = 0.0;
};
RotationCoboundary rotation_coboundary(const CircleCocycle& a, const CircleCocycle& b, int samples = 2000,
                                       unsigned long long seed = 29);

/// h^* tau on an R x R rectangle refinement with chart assignment c(r) such
/// that h(rect r) lies in chart c(r). Throws ChartRefinementFailed.
CircleCocycle pullback_cocycle(const CircleCocycle& tau, const DisplacementField& h);

/// Point of a circle bundle over T^2 in chart coordinates.
struct BundlePoint {
  int chart = 0;
  Eigen::Vector2d base{0.0, 0.0};  // in [0,1)^2
  double theta = 0.0;              // mod 1
};

/// Re-express p in chart j: theta_j = tau_ji(base)(theta_i).
BundlePoint to_chart(const CircleCocycle& tau, const BundlePoint& p, int j);
BundlePoint canonical(const CircleCocycle& tau, const BundlePoint& p);

/// H/Gamma and the twist-2 bundle over `cover`: theta = 2z in the chart
/// coordinates of the coset representative.
BundlePoint nil_to_bundle(const Cover& cover, const HeisD& g);
HeisD bundle_to_nil(const Cover& cover, const BundlePoint& p);

using BundleMap = std::function<BundlePoint(const BundlePoint&)>;

/// psi_{i kappa}(x): fiber of M in chart i over x -> fiber of M^ in chart
/// kappa over h(x).
using FiberIdentification = std::function<CircleDiffeo(int i, int kappa, const Eigen::Vector2d& x)>;

/// Identification for twist-k bundles and h = id + u, induced by
/// g -> (u1, u2, 0) * g on the twisted Heisenberg group.
FiberIdentification twist_identification(const Cover& source, const Cover& target, const DisplacementField& h, int k);

struct LiftedConjugacy {
  BundleMap map;
  double consistency = 0.0;  // worst chart-compatibility residual of psi
};

/// h~(i, x, t) = (kappa, h(x), psi_{i kappa}(x)(t)). Checks psi against both
/// cocycles on samples; throws NotCohomologous above 1e-9.
LiftedConjugacy lift_conjugacy(const DisplacementField& h, const CircleCocycle& tau_m, const CircleCocycle& tau_mhat,
                               const FiberIdentification& psi, int samples = 2000);

struct SmoothModel {
  IntMatrix2 A;
  CircleCocycle tau;
  /// Rotation taking the chart-i fiber over x to the chart-kappa fiber over Ax.
  std::function<double(int i, int kappa, const Eigen::Vector2d& x)> rho;
  int twist = 0;
  int r2 = 0, s2 = 0;
  double consistency = 0.0;

  BundlePoint operator()(const BundlePoint& p) const;
  /// d/dt of the fiber map; identically 1 since fibers move by rotations.
  double fiber_derivative(const BundlePoint& p) const;
};

struct SmoothModelOptions {
  double constant_rotation = 0.0;
  /// Extra rotation field w(x), added in every chart.
  FourierSeries fiber_modes;
  double fiber_eps = 0.0;
  int samples = 2000;
};

/// g covering A, rotating fibers, consistent with a rotation cocycle.
/// Throws InconsistentRotationField.
SmoothModel build_smooth_model(const IntMatrix2& A, const CircleCocycle& tau_rot,
                               const SmoothModelOptions& options = {});

/// The fibered map on H/Gamma in twist-2 bundle coordinates.
BundleMap fibered_bundle_map(const FiberedMapSpec& f, const Cover& cover);

struct LeafConjugacyReport {
  int samples = 0;
  double fiber_residual = 0.0;  // spread of base(h~(x, t)) over t
  double leaf_residual = 0.0;   // dist(base h~(f^ p), A base h~(p))
  double model_residual = 0.0;  // dist(base g(h~ p), A base h~(p))
  double max() const { return std::max({fiber_residual, leaf_residual, model_residual}); }
};

LeafConjugacyReport leaf_conjugacy_check(const BundleMap& hhat, const BundleMap& fhat, const SmoothModel& g,
                                         const Cover& source, int samples, unsigned long long seed = 31);

}  // namespace nilmodel
