#pragma once

#include <Eigen/Core>

#include <optional>
#include <vector>

#include "nilmodel/automorphism.hpp"
#include "nilmodel/conjugacy.hpp"
#include "nilmodel/torus.hpp"

namespace nilmodel {

struct PseudoOrbit {
  std::vector<Eigen::Vector2d> points;  // x_0 .. x_L in [0,1)^2
  double delta = 0.0;                   // max dist(f x_i, x_{i+1}), recomputed
  unsigned long long seed = 0;
};

/// x_{i+1} = f(x_i) + noise, |noise| < delta. The noise sequence depends on
/// the seed only, not on the orbit.
PseudoOrbit generate_pseudo_orbit(const TorusMap& f, const Eigen::Vector2d& x0, int length, double delta,
                                  unsigned long long seed);

/// max_i dist(f x_i, x_{i+1}).
double max_jump(const TorusMap& f, const std::vector<Eigen::Vector2d>& points);

struct ShadowingResult {
  Eigen::Vector2d shadow_start;
  std::vector<Eigen::Vector2d> orbit;  // z_i = x_i + v_i
  double epsilon = 0.0;                // max_i dist(z_i, x_i)
  double residual = 0.0;               // max_i dist(f z_i, z_{i+1})
  int passes = 0;
};

/// Orbit correction v_{i+1} = A v_i + (f(z_i) - z_{i+1}) split into the
/// eigen-coordinates of A: the unstable part solved backward from v_L = 0,
/// the stable part forward from v_0 = 0. Nonlinear f repeats the pass with
/// the frozen linear part until the residual is below 1e-12.
/// Throws NotHyperbolic, NewtonDiverged.
ShadowingResult shadow(const TorusMap& f, const HyperbolicityCertificate& cert, const PseudoOrbit& po);

struct ExpansivityOptions {
  unsigned long long seed = 3;
  double max_initial_distance = 0.5;
};

/// Largest c with: every sampled pair at distance < c separates to >= c
/// within |n| <= horizon. An empirical witness, not a proof.
double expansivity_probe(const TorusMap& f, int pairs, int horizon, const ExpansivityOptions& options = {});

struct IntersectionResult {
  Eigen::Vector2d point;
  Eigen::Vector2d linear_point;  // W^s(h x) meet W^u(h y) for A
  double forward_residual = 0.0;   // min_{n<=30} dist(f^n z, f^n x)
  double backward_residual = 0.0;  // min_{n<=30} dist(f^-n z, f^-n y)
  double pullback_residual = 0.0;  // dist(h z, linear_point)
};

/// Intersection of the stable leaf of x with the unstable leaf of y, through
/// the linear model and a Newton pullback by h. `start` overrides the Newton
/// seed. Throws PullbackFailed.
IntersectionResult product_structure_intersect(const TorusMap& f, const DisplacementField& h,
                                               const Eigen::Vector2d& x, const Eigen::Vector2d& y,
                                               std::optional<Eigen::Vector2d> start = std::nullopt);

}  // namespace nilmodel
