#pragma once

#include <Eigen/Core>

#include <utility>
#include <vector>

#include "nilmodel/automorphism.hpp"
#include "nilmodel/fibered.hpp"
#include "nilmodel/periodic_grid.hpp"
#include "nilmodel/torus.hpp"

namespace nilmodel {

/// Horizontal distribution H = span{X + cx Z, Y + cy Z}; always
/// complementary to the fiber direction Z.
struct ConnectionSpec {
  double x_correction = 0.0;
  double y_correction = 0.0;

  /// Horizontal lift of a base vector, in frame coordinates (X, Y, Z).
  Eigen::Vector3d lift(const Eigen::Vector2d& v) const {
    return {v.x(), v.y(), x_correction * v.x() + y_correction * v.y()};
  }
};

/// Dg in the basis (E^u lift, E^s lift, Z), which is
///   [ a_u  0    0 ]
///   [ 0    a_s  0 ]
///   [ c_u  c_s  k ]
/// for fibered maps over a linear base.
struct Blocks {
  double a_u = 0.0, a_s = 0.0, c_u = 0.0, c_s = 0.0, k = 0.0;
};

struct BlockDecomposition {
  FiberedMapSpec map;
  ConnectionSpec connection;
  TorusMap base;
  Eigen::Vector2d e_u, e_s;  // unit eigendirections of the base matrix
  Eigen::Vector3d lift_u, lift_s;
  double lambda_u = 0.0, lambda_s = 0.0;
  int n = 0;

  PeriodicGrid a_u, a_s, c_u, c_s, k;  // sampled blocks
  double upper_right = 0.0;  // worst |fiber -> horizontal| entry
  double cross = 0.0;        // worst E^u <-> E^s mixing
  double reassembly = 0.0;   // |B M B^-1 - Dg| on the grid

  Blocks at(const Eigen::Vector2d& p) const;
  /// Exact preimage of q under the base map when it is linear.
  Eigen::Vector2d preimage(const Eigen::Vector2d& q) const;
  Eigen::Vector2d image(const Eigen::Vector2d& p) const;
  /// sup|K| * sup|A_u^-1|; the graph transform contracts when < 1.
  double contraction_bound() const;
};

/// Throws NotFibered when Dg moves Z off the fiber and InvalidConfig when
/// the base map does not preserve the eigendirections (nonlinear base).
BlockDecomposition block_decompose(const FiberedMapSpec& g, const ConnectionSpec& conn,
                                   const HyperbolicityCertificate& base_cert, int n);

/// Scalar section of Hom(E^u lift, E^c) (or of the stable counterpart) on
/// the base grid; its graph is span{lift + sigma Z}.
struct SectionField {
  PeriodicGrid values;

  SectionField() = default;
  explicit SectionField(int n, double fill = 0.0) : values(n, fill) {}
  int size() const { return values.size(); }
  double operator()(const Eigen::Vector2d& p) const { return values(p); }
  double sup_norm() const { return values.sup_norm(); }
};

/// (Gamma sigma)(q) = (C_p + K_p sigma(p)) / A_p with p = g^-1(q).
SectionField transform_step(const SectionField& sigma, const BlockDecomposition& blocks);

/// Backward mirror for E^s: (Gamma tau)(p) = (A_s tau(g p) - C_s) / K_p.
SectionField stable_transform_step(const SectionField& tau, const BlockDecomposition& blocks);

struct GraphTransformReport {
  int n = 0;
  int iterations = 0;
  double rate = 0.0;        // empirical contraction of successive changes
  double lambda_inv = 0.0;  // contraction bound sup|K| sup|A^-1|
  double sup_sigma = 0.0;
  double residual = 0.0;    // |Gamma sigma - sigma|
  double final_change = 0.0;
  std::vector<double> change_history;
};

/// Iterates from sigma = 0 until the sup-change drops below tol. Throws
/// NotContracting when the bound is >= 1 and NoConvergence after
/// max_iterations.
std::pair<SectionField, GraphTransformReport> solve_unstable_section(const BlockDecomposition& blocks, double tol,
                                                                     int max_iterations = 500);
std::pair<SectionField, GraphTransformReport> solve_stable_section(const BlockDecomposition& blocks, double tol,
                                                                   int max_iterations = 500);

/// Largest |Gamma a - Gamma b| / |a - b| over random section pairs.
double step_lipschitz(const BlockDecomposition& blocks, int pairs, unsigned long long seed = 7);

struct OracleReport {
  int points = 0;
  int steps = 0;
  double max_angle = 0.0;
};

/// Pushes a generic vector of (E^u lift) + Z forward `steps` times along the
/// orbit ending at every grid node, using the frame Jacobian only, and
/// compares its direction with graph(sigma_u).
OracleReport power_iteration_oracle(const BlockDecomposition& blocks, const SectionField& sigma_u, int steps = 50);

struct SplittingReport {
  int n = 0;
  double min_unstable = 0.0, max_unstable = 0.0;
  double min_stable = 0.0, max_stable = 0.0;
  double min_center = 0.0, max_center = 0.0;
  double invariance = 0.0;  // worst off-bundle component of Dg v
  bool pass = false;
};

/// Rates in the adapted metric: the three bundles declared orthogonal, with
/// base norms on E^u and E^s and the fiber norm on E^c.
SplittingReport verify_splitting_rates(const BlockDecomposition& blocks, const SectionField& sigma_u,
                                       const SectionField& sigma_s, double tol = 1e-9);

}  // namespace nilmodel
