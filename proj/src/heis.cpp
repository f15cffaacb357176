#include "nilmodel/heis.hpp"

#include <algorithm>
#include <limits>

namespace nilmodel {

bool in_lattice(const HeisQ& g) {
  const Rational z2 = g.z * 2;
  return g.x.get_den() == 1 && g.y.get_den() == 1 && z2.get_den() == 1;
}

LatticeElement to_lattice(const HeisQ& g) {
  const Rational z2 = g.z * 2;
  return {g.x.get_num().get_si(), g.y.get_num().get_si(), Rational(z2).get_num().get_si()};
}

std::pair<NilPoint, LatticeElement> reduce(const HeisQ& g) {
  // g*(a,0,0) = (x+a, y, z), then *(0,b,0) adds x'b to z, then *(0,0,c).
  const mpz_class a = -floor(g.x);
  const Rational x1 = g.x + Rational(a);
  const mpz_class b = -floor(g.y);
  const Rational y1 = g.y + Rational(b);
  const Rational z1 = g.z + x1 * Rational(b);
  const Rational z2 = z1 * 2;
  const mpz_class c2 = -floor(z2);
  const Rational z_final = z1 + Rational(c2) / 2;

  // (a,0,0)(0,b,0)(0,0,c) = (a, b, ab + c).
  const mpz_class total_c2 = 2 * a * b + c2;
  LatticeElement gamma{a.get_si(), b.get_si(), total_c2.get_si()};
  return {NilPoint(HeisQ{x1, y1, z_final}), gamma};
}

HeisD reduce_numeric(const HeisD& g) {
  const double a = -std::floor(g.x);
  const double x1 = g.x + a;
  const double b = -std::floor(g.y);
  const double y1 = g.y + b;
  const double z1 = g.z + x1 * b;
  double z = z1 - 0.5 * std::floor(2.0 * z1);
  if (z >= 0.5) z -= 0.5;
  if (z < 0.0) z = 0.0;
  return {x1 >= 1.0 ? 0.0 : x1, y1 >= 1.0 ? 0.0 : y1, z};
}

BasePoint project_base(const NilPoint& p) { return {frac(p.rep().x), frac(p.rep().y)}; }

double frame_distance(const NilPoint& p, const NilPoint& q) {
  const HeisD pd = to_double(p.rep());
  const HeisD qd = to_double(q.rep());
  const HeisD pinv = inverse(pd);
  const HeisD qinv = inverse(qd);
  double best = std::numeric_limits<double>::infinity();
  for (int a = -2; a <= 2; ++a) {
    for (int b = -2; b <= 2; ++b) {
      for (int c2 = -2; c2 <= 2; ++c2) {
        const HeisD gamma{double(a), double(b), 0.5 * c2};
        best = std::min(best, log_frame(pd * gamma * qinv).norm());
        best = std::min(best, log_frame(qd * gamma * pinv).norm());
      }
    }
  }
  return best;
}

Eigen::Vector2d torus_difference(const Eigen::Vector2d& v, const Eigen::Vector2d& w) {
  Eigen::Vector2d d = v - w;
  d.x() -= std::floor(d.x() + 0.5);
  d.y() -= std::floor(d.y() + 0.5);
  return d;
}

double torus_distance(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return torus_difference(a, b).norm();
}

}  // namespace nilmodel
