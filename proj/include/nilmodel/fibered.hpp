#pragma once

#include <Eigen/Core>

#include <array>

#include "nilmodel/automorphism.hpp"
#include "nilmodel/heis.hpp"
#include "nilmodel/torus.hpp"

namespace nilmodel {

/// Fibered map on M = H/Gamma: g -> P(pi(g)) * core(g), where
/// P(x,y) = (base_eps*u(x,y), base_eps*v(x,y), fiber_eps*w(x,y)) and u, v, w
/// are Z^2-periodic. Left multiplication by a function of the base point
/// commutes with the right Gamma-action, so the map descends to M and keeps
/// the circle fibers.
struct FiberedMapSpec {
  HeisAutomorphism core;
  double base_eps = 0.0;
  std::array<FourierSeries, 2> base_modes;
  double fiber_eps = 0.0;
  FourierSeries fiber_modes;

  bool has_perturbation() const;
  HeisD perturbation(const Eigen::Vector2d& base) const;
};

/// Validates a spec: Gamma-equivariance on seeded samples (NotEquivariant)
/// and that the induced base map stays a diffeomorphism (InvalidConfig).
FiberedMapSpec make_fibered_map(FiberedMapSpec spec);

HeisD evaluate_lift(const FiberedMapSpec& f, const HeisD& g);

/// Exact when the map carries no perturbation; otherwise the perturbation is
/// evaluated in double precision and then applied exactly.
NilPoint evaluate(const FiberedMapSpec& f, const NilPoint& p);

/// Derivative in coordinates (x, y, z).
Eigen::Matrix3d jacobian_coords(const FiberedMapSpec& f, const HeisD& g);

/// Derivative in the frame X = d/dx + y d/dz, Y = d/dy, Z = d/dz at g and f(g).
Eigen::Matrix3d jacobian_frame(const FiberedMapSpec& f, const HeisD& g);
Eigen::Matrix3d jacobian_frame(const FiberedMapSpec& f, const NilPoint& p);

/// Base dynamics: core abelianization plus base perturbation.
TorusMap induced_base_map(const FiberedMapSpec& f);

struct ConeParams {
  double aperture_u = 0.3490658503988659;  // 20 degrees
  double aperture_s = 0.3490658503988659;
  Eigen::Vector2d axis_u{1.0, 0.0};
  Eigen::Vector2d axis_s{0.0, 1.0};

  /// Cones around the horizontally lifted eigendirections of the core.
  static ConeParams from_certificate(const HyperbolicityCertificate& cert, double aperture);
};

struct PHReport {
  int grid_n = 0;
  double min_unstable_expansion = 0.0;
  double max_stable_contraction = 0.0;
  double min_center_rate = 0.0;
  double max_center_rate = 0.0;
  double max_unstable_angle = 0.0;
  double max_stable_angle = 0.0;

  double margin_unstable_cone = 0.0;
  double margin_stable_cone = 0.0;
  double margin_expansion = 0.0;
  double margin_contraction = 0.0;
  double margin_unstable_over_center = 0.0;
  double margin_center_over_stable = 0.0;
  bool pass = false;

  double worst_margin() const;
};

/// Cone-field check on a grid_n^3 grid of M (grid_n >= 8).
PHReport verify_partial_hyperbolicity(const FiberedMapSpec& f, const ConeParams& cones, int grid_n);

}  // namespace nilmodel
