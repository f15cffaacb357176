#pragma once

#include <memory>
#include <optional>
#include <utility>
#include <vector>

namespace nilmodel {

/// Orientation-preserving circle diffeomorphism, handled through a lift
/// F: R -> R with F(t + 1) = F(t) + 1. Values are immutable expression
/// trees, so compositions and inverses stay exact up to evaluation error.
class CircleDiffeo {
 public:
  /// One harmonic c*cos(2 pi k t) + s*sin(2 pi k t) of the wiggle w.
  struct Harmonic {
    int k = 1;
    double c = 0.0;
    double s = 0.0;
  };

  CircleDiffeo();  // identity

  static CircleDiffeo identity() { return {}; }
  static CircleDiffeo rotation(double amount);
  /// t -> t + rotation + w(t); requires sum 2 pi k (|c| + |s|) < 1 so that
  /// sup |w'| < 1 (InvalidConfig otherwise).
  static CircleDiffeo basic(double rotation, std::vector<Harmonic> wiggle);
  /// t -> sum_k w_k (F_k(t) - F_k(0)) + shift, with w_k >= 0 summing to 1.
  static CircleDiffeo blend(const std::vector<std::pair<double, CircleDiffeo>>& terms, double shift = 0.0);

  /// this o other.
  CircleDiffeo compose(const CircleDiffeo& other) const;
  CircleDiffeo inverse() const;

  double operator()(double t) const;
  double derivative(double t) const;

  /// Rotation amount when the tree is built from rotations only.
  std::optional<double> as_rotation() const;
  /// Mean displacement of the lift over one period.
  double rotation_part() const;
  /// sup |F(t) - t - rotation_part()| on a 64-point sample.
  double wiggle_norm() const;

  struct Node;

 private:
  explicit CircleDiffeo(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

/// Distance on R/Z.
double circle_distance(double a, double b);

}  // namespace nilmodel
