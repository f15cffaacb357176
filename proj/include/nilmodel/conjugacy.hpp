#pragma once

#include <Eigen/Core>

#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "nilmodel/automorphism.hpp"
#include "nilmodel/heis.hpp"
#include "nilmodel/periodic_grid.hpp"
#include "nilmodel/torus.hpp"

namespace nilmodel {

/// Data for evaluating u off the grid through the functional equation
/// A u(x) = p(x) + u(f x): the unstable eigen-coordinate is pushed forward
/// along the f-orbit, the stable one backward along the f^-1-orbit, `depth`
/// steps each, before falling back on the grid. The limit conjugacy is
/// only Hoelder, so plain interpolation caps the defect near the mesh size;
/// each step divides the interpolation error by max(lambda_s, 1/lambda_u).
struct OrbitRefinement {
  TorusMap f;
  Eigen::Matrix2d basis;      // columns: unstable, stable eigenvector
  Eigen::Matrix2d basis_inv;
  double lambda_u = 0.0;      // signed eigenvalues
  double lambda_s = 0.0;
  int depth = 0;
};

/// h = id + u on T^2 with u stored on an N x N grid.
class DisplacementField {
 public:
  DisplacementField() = default;
  explicit DisplacementField(PeriodicGrid2 grid) : grid_(std::move(grid)) {}
  DisplacementField(PeriodicGrid2 grid, std::shared_ptr<const OrbitRefinement> refinement)
      : grid_(std::move(grid)), refinement_(std::move(refinement)) {}

  static DisplacementField identity(int n) { return DisplacementField(PeriodicGrid2(n)); }

  int size() const { return grid_.size(); }
  const PeriodicGrid2& grid() const { return grid_; }
  const std::shared_ptr<const OrbitRefinement>& refinement() const { return refinement_; }

  /// u(x), orbit-refined when refinement data is attached.
  Eigen::Vector2d operator()(const Eigen::Vector2d& x) const;
  /// u(x) by bicubic interpolation only.
  Eigen::Vector2d interpolated(const Eigen::Vector2d& x) const { return grid_(x); }

  /// h(x) = x + u(x) reduced to [0,1)^2; `lift` keeps the unreduced value.
  Eigen::Vector2d apply(const Eigen::Vector2d& x) const { return wrap(lift(x)); }
  Eigen::Vector2d lift(const Eigen::Vector2d& x) const { return x + (*this)(x); }

  double sup_norm() const { return grid_.sup_norm(); }

 private:
  PeriodicGrid2 grid_;
  std::shared_ptr<const OrbitRefinement> refinement_;
};

struct ConjugacyOptions {
  int max_iterations = 400;
  int refine_depth = 16;
  /// Starting field; zero when empty.
  std::optional<PeriodicGrid2> initial;
  int injectivity_samples = 10000;
};

struct ConjugacyReport {
  int n = 0;
  int iterations = 0;
  double final_change = 0.0;
  double defect = 0.0;               // 4N grid, orbit-refined evaluation
  double interpolated_defect = 0.0;  // 4N grid, plain interpolation
  double rate = 0.0;                 // empirical contraction of the sup-change
  double expected_rate = 0.0;        // max(|lambda_s|, 1/|lambda_u|)
  double injectivity_margin = 0.0;
  double sup_u = 0.0;
  std::vector<double> change_history;
};

/// Solves A u(x) = p(x) + u(f x) by the split contraction in A's
/// eigen-coordinates. Throws NotHyperbolic, DegreeMismatch, NoConvergence.
std::pair<DisplacementField, ConjugacyReport> solve_semiconjugacy(const TorusMap& f, const IntMatrix2& A,
                                                                  const HyperbolicityCertificate& cert, int n,
                                                                  double tol,
                                                                  const ConjugacyOptions& options = {});

/// sup over an m x m grid of dist_T2(A h(x), h(f x)).
double conjugacy_defect(const DisplacementField& h, const TorusMap& f, const IntMatrix2& A, int m);

struct InjectivityReport {
  double min_ratio = 0.0;      // min dist(h x, h y) / dist(x, y) over sampled pairs
  double min_cell_area = 0.0;  // min signed image area of grid half-cells / cell area
  double margin = 0.0;         // min of the two
};

/// Local inverse of h near `start` (default target - u(target)) by Newton
/// with secant slopes taken at the scale of the current residual.
/// Throws PullbackFailed when the derivative degenerates or Newton stalls.
Eigen::Vector2d invert_displacement(const DisplacementField& h, const Eigen::Vector2d& target,
                                    std::optional<Eigen::Vector2d> start = std::nullopt,
                                    double* residual = nullptr);

InjectivityReport injectivity_probe(const DisplacementField& h, int samples, unsigned long long seed = 11);

}  // namespace nilmodel
