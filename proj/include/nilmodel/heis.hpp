#pragma once

// Exact arithmetic in the 3-dimensional Heisenberg group H, the lattice
// Gamma = {x, y, 2z in Z}, fundamental-domain reduction for M = H/Gamma
// (right cosets g*Gamma) and the bundle projection M -> T^2.

#include <Eigen/Core>

#include <cmath>
#include <utility>

#include "nilmodel/rational.hpp"

namespace nilmodel {

/// The unipotent matrix [[1, x, z], [0, 1, y], [0, 0, 1]].
template <typename Scalar>
struct HeisPoint {
  Scalar x{0};
  Scalar y{0};
  Scalar z{0};

  static HeisPoint identity() { return {Scalar(0), Scalar(0), Scalar(0)}; }

  bool operator==(const HeisPoint& o) const { return x == o.x && y == o.y && z == o.z; }
  bool operator!=(const HeisPoint& o) const { return !(*this == o); }
};

using HeisQ = HeisPoint<Rational>;
using HeisD = HeisPoint<double>;

template <typename Scalar>
HeisPoint<Scalar> multiply(const HeisPoint<Scalar>& g, const HeisPoint<Scalar>& h) {
  return {g.x + h.x, g.y + h.y, g.z + h.z + g.x * h.y};
}

template <typename Scalar>
HeisPoint<Scalar> inverse(const HeisPoint<Scalar>& g) {
  return {-g.x, -g.y, g.x * g.y - g.z};
}

template <typename Scalar>
HeisPoint<Scalar> operator*(const HeisPoint<Scalar>& g, const HeisPoint<Scalar>& h) {
  return multiply(g, h);
}

inline HeisD to_double(const HeisQ& g) { return {g.x.get_d(), g.y.get_d(), g.z.get_d()}; }
inline HeisQ exact(const HeisD& g) { return {Rational(g.x), Rational(g.y), Rational(g.z)}; }

/// (a, b, c2/2) with a, b, c2 integers.
struct LatticeElement {
  long a = 0;
  long b = 0;
  long c2 = 0;

  HeisQ point() const { return {Rational(a), Rational(b), make_rational(c2, 2)}; }
  bool is_identity() const { return a == 0 && b == 0 && c2 == 0; }
  bool operator==(const LatticeElement&) const = default;
};

bool in_lattice(const HeisQ& g);

/// Exact lattice element for g, which must satisfy in_lattice(g).
LatticeElement to_lattice(const HeisQ& g);

/// Canonical representative of g*Gamma in [0,1) x [0,1) x [0,1/2).
class NilPoint {
 public:
  NilPoint() = default;

  const HeisQ& rep() const { return rep_; }
  bool operator==(const NilPoint& o) const { return rep_ == o.rep_; }

  static NilPoint identity() { return NilPoint(); }

 private:
  explicit NilPoint(HeisQ rep) : rep_(std::move(rep)) {}
  HeisQ rep_;

  friend std::pair<NilPoint, LatticeElement> reduce(const HeisQ& g);
};

/// Reduces x first (right multiplication by (a,0,0)), then y, then z.
/// Returns (n, gamma) with g * gamma == n.rep().
std::pair<NilPoint, LatticeElement> reduce(const HeisQ& g);

inline NilPoint to_nil(const HeisQ& g) { return reduce(g).first; }

/// Floating-point counterpart of reduce, used by the numeric modules.
HeisD reduce_numeric(const HeisD& g);

struct BasePoint {
  Rational u{0};
  Rational v{0};

  bool operator==(const BasePoint&) const = default;
  Eigen::Vector2d to_vector() const { return {u.get_d(), v.get_d()}; }
};

BasePoint project_base(const NilPoint& p);

inline double to_double_scalar(double v) { return v; }
inline double to_double_scalar(const Rational& v) { return v.get_d(); }

/// Exponential-coordinate vector (X, Y, Z) of g in the frame X = d/dx + y d/dz,
/// Y = d/dy, Z = d/dz, which is invariant under the right action of Gamma.
template <typename Scalar>
Eigen::Vector3d log_frame(const HeisPoint<Scalar>& g) {
  const double x = to_double_scalar(g.x);
  const double y = to_double_scalar(g.y);
  const double z = to_double_scalar(g.z);
  return {x, y, z - 0.5 * x * y};
}

/// Approximate Riemannian distance on M for the frame above declared
/// orthonormal: minimum of |log(p*gamma*q^-1)| over |a|,|b|,|c2| <= 2, taken
/// in both orders so that the result is symmetric.
double frame_distance(const NilPoint& p, const NilPoint& q);

/// Flat distance on T^2 between two points given in [0,1)^2 coordinates.
double torus_distance(const Eigen::Vector2d& a, const Eigen::Vector2d& b);

/// Representative of v - w in [-1/2, 1/2)^2.
Eigen::Vector2d torus_difference(const Eigen::Vector2d& v, const Eigen::Vector2d& w);

/// Componentwise reduction into [0, 1).
inline Eigen::Vector2d wrap(const Eigen::Vector2d& v) {
  return {v.x() - std::floor(v.x()), v.y() - std::floor(v.y())};
}

}  // namespace nilmodel
