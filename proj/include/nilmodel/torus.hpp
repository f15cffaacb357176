#pragma once

#include <Eigen/Core>

#include <array>
#include <functional>
#include <memory>
#include <variant>
#include <vector>

#include "nilmodel/automorphism.hpp"
#include "nilmodel/periodic_grid.hpp"

namespace nilmodel {

/// c*cos(2 pi k.x) + s*sin(2 pi k.x).
struct FourierMode {
  int kx = 0;
  int ky = 0;
  double cos = 0.0;
  double sin = 0.0;
};

/// Truncated Z^2-periodic trigonometric polynomial (|kx|, |ky| <= 4).
struct FourierSeries {
  std::vector<FourierMode> modes;

  static constexpr int kMaxDegree = 4;

  bool empty() const { return modes.empty(); }
  double value(const Eigen::Vector2d& p) const;
  Eigen::Vector2d gradient(const Eigen::Vector2d& p) const;
  /// Value and gradient from a single pass over the modes.
  double value_gradient(const Eigen::Vector2d& p, Eigen::Vector2d& grad) const;
  /// Sum of |c| + |s| over modes, an upper bound for the sup norm.
  double amplitude_bound() const;
  /// Sum of 2 pi |k| (|c| + |s|), an upper bound for the gradient.
  double gradient_bound() const;
};

/// Z^2-periodic displacement: Fourier pair or a grid pair.
using Displacement = std::variant<std::array<FourierSeries, 2>, PeriodicGrid2>;

/// Torus self-map through its lift x -> linear*x + displacement(x).
class TorusMap {
 public:
  TorusMap() = default;
  explicit TorusMap(IntMatrix2 linear) : linear_(linear), displacement_(std::array<FourierSeries, 2>{}) {}
  TorusMap(IntMatrix2 linear, std::array<FourierSeries, 2> modes, double scale = 1.0);
  TorusMap(IntMatrix2 linear, PeriodicGrid2 grid);

  const IntMatrix2& linear() const { return linear_; }
  Eigen::Matrix2d linear_d() const { return linear_.cast<double>(); }
  const Displacement& displacement() const { return displacement_; }

  /// Periodic part p(x) = lift(x) - linear*x.
  Eigen::Vector2d periodic_part(const Eigen::Vector2d& x) const;
  Eigen::Vector2d lift(const Eigen::Vector2d& x) const;
  Eigen::Vector2d operator()(const Eigen::Vector2d& x) const;
  Eigen::Matrix2d jacobian(const Eigen::Vector2d& x) const;

  /// Lift of the inverse near linear^-1 * y: Newton seeded from the linear
  /// inverse, at most `iterations` steps, stopping at `tol`. Throws
  /// NewtonDiverged when the residual stays above 1e-10.
  Eigen::Vector2d inverse_lift(const Eigen::Vector2d& y, int iterations = 8, double tol = 1e-13) const;

  bool is_linear() const;

  /// min |det Df| over an n x n grid (diffeomorphism sanity check).
  double min_jacobian_determinant(int n = 64) const;

 private:
  IntMatrix2 linear_ = IntMatrix2::Identity();
  Displacement displacement_;
};

/// Any lift R^2 -> R^2 of a continuous torus map.
using LiftFunction = std::function<Eigen::Vector2d(const Eigen::Vector2d&)>;

/// Action on H_1: column j = lift(x0 + e_j) - lift(x0), checked to be
/// integral (1e-6) and identical at three base points.
IntMatrix2 induced_matrix(const LiftFunction& lift);
IntMatrix2 induced_matrix(const TorusMap& f);

}  // namespace nilmodel
