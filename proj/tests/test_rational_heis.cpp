#include <doctest.h>

#include <array>
#include <random>

#include "nilmodel/heis.hpp"

using namespace nilmodel;

namespace {

using Mat3 = std::array<std::array<Rational, 3>, 3>;

// Independent model: the group law as multiplication of unipotent matrices.
Mat3 as_matrix(const HeisQ& g) {
  Mat3 m;
  for (auto& row : m) row.fill(Rational(0));
  m[0][0] = m[1][1] = m[2][2] = 1;
  m[0][1] = g.x;
  m[0][2] = g.z;
  m[1][2] = g.y;
  return m;
}

Mat3 matmul(const Mat3& a, const Mat3& b) {
  Mat3 c;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      c[i][j] = 0;
      for (int k = 0; k < 3; ++k) c[i][j] += a[i][k] * b[k][j];
    }
  return c;
}

struct Sampler {
  std::mt19937_64 rng{12345};
  std::uniform_int_distribution<long long> num{-300, 300}, den{1, 40};
  std::uniform_int_distribution<long> lat{-6, 6};

  Rational q() { return make_rational(num(rng), den(rng)); }
  HeisQ g() { return {q(), q(), q()}; }
  LatticeElement gamma() { return {lat(rng), lat(rng), lat(rng)}; }
};

}  // namespace

TEST_CASE("floor and frac on rationals") {
  CHECK(floor(make_rational(7, 2)) == 3);
  CHECK(floor(make_rational(-7, 2)) == -4);
  CHECK(frac(make_rational(-7, 2)) == make_rational(1, 2));
  CHECK(frac(Rational(5)) == 0);
  Sampler s;
  for (int i = 0; i < 500; ++i) {
    const Rational q = s.q();
    const Rational f = frac(q);
    CHECK(f >= 0);
    CHECK(f < 1);
    CHECK(Rational(floor(q)) + f == q);
  }
}

TEST_CASE("rational parsing and printing round trip") {
  CHECK(parse_rational("3/4") == make_rational(3, 4));
  CHECK(parse_rational("-6/8") == make_rational(-3, 4));
  CHECK(parse_rational("0.25") == make_rational(1, 4));
  CHECK(parse_rational("0.0625") == make_rational(1, 16));
  CHECK(parse_rational("1.5e-2") == make_rational(3, 200));
  CHECK(parse_rational("7") == 7);
  CHECK(to_string(Rational(0)) == "0/1");
  CHECK(to_string(make_rational(-3, 2)) == "-3/2");
  Sampler s;
  for (int i = 0; i < 200; ++i) {
    const Rational q = s.q();
    CHECK(parse_rational(to_string(q)) == q);
  }
}

TEST_CASE("make_rational is canonical so equal values compare equal") {
  CHECK(make_rational(4, 2) == Rational(2));
  CHECK(make_rational(6, -4) == make_rational(-3, 2));
  const LatticeElement even{0, 0, 4};
  CHECK(even.point().z == 2);
  CHECK(even.point().z + make_rational(1, 2) == make_rational(5, 2));
}

TEST_CASE("group law matches unipotent matrix multiplication") {
  Sampler s;
  for (int i = 0; i < 300; ++i) {
    const HeisQ g = s.g(), h = s.g();
    CHECK(as_matrix(g * h) == matmul(as_matrix(g), as_matrix(h)));
    CHECK(g * inverse(g) == HeisQ::identity());
    CHECK(inverse(g) * g == HeisQ::identity());
    const HeisQ k = s.g();
    CHECK((g * h) * k == g * (h * k));
  }
}

TEST_CASE("lattice membership and conversion") {
  CHECK(in_lattice({Rational(1), Rational(-2), make_rational(3, 2)}));
  CHECK_FALSE(in_lattice({make_rational(1, 2), Rational(0), Rational(0)}));
  CHECK_FALSE(in_lattice({Rational(0), Rational(0), make_rational(1, 3)}));
  Sampler s;
  for (int i = 0; i < 200; ++i) {
    const LatticeElement a = s.gamma(), b = s.gamma();
    CHECK(in_lattice(a.point() * b.point()));
    CHECK(in_lattice(inverse(a.point())));
    CHECK(to_lattice(a.point()) == a);
  }
}

TEST_CASE("reduce returns the canonical right-coset representative") {
  Sampler s;
  for (int i = 0; i < 500; ++i) {
    const HeisQ g = s.g();
    const auto [n, gamma] = reduce(g);
    const HeisQ& r = n.rep();
    CHECK(g * gamma.point() == r);
    CHECK(r.x >= 0);
    CHECK(r.x < 1);
    CHECK(r.y >= 0);
    CHECK(r.y < 1);
    CHECK(r.z >= 0);
    CHECK(r.z < make_rational(1, 2));
    // Coset invariance: any g*gamma' reduces to the same point.
    CHECK(to_nil(g * s.gamma().point()) == n);
    // Idempotence.
    CHECK(reduce(r).second.is_identity());
  }
}

TEST_CASE("numeric reduction agrees with exact reduction") {
  Sampler s;
  for (int i = 0; i < 200; ++i) {
    const HeisQ g = s.g();
    const HeisD num = reduce_numeric(to_double(g));
    // Points on a cell boundary may land on either side; compare on M.
    CHECK(frame_distance(to_nil(g), to_nil(exact(num))) < 1e-9);
  }
}

TEST_CASE("frame distance is symmetric, zero on the diagonal, and bounded") {
  Sampler s;
  for (int i = 0; i < 100; ++i) {
    const NilPoint p = to_nil(s.g()), q = to_nil(s.g());
    CHECK(frame_distance(p, p) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(frame_distance(p, q) == doctest::Approx(frame_distance(q, p)).epsilon(1e-12));
    CHECK(frame_distance(p, q) < 2.0);
  }
}

TEST_CASE("torus helpers") {
  const Eigen::Vector2d a(0.95, 0.02), b(0.05, 0.98);
  CHECK(torus_distance(a, b) == doctest::Approx(std::hypot(0.1, 0.04)));
  const Eigen::Vector2d d = torus_difference(a, b);
  CHECK(d.x() == doctest::Approx(-0.1));
  CHECK(d.y() == doctest::Approx(0.04));
  const Eigen::Vector2d w = wrap(Eigen::Vector2d(-0.25, 3.5));
  CHECK(w.x() == doctest::Approx(0.75));
  CHECK(w.y() == doctest::Approx(0.5));
}

TEST_CASE("base projection forgets the fiber") {
  const HeisQ g{make_rational(7, 3), make_rational(-1, 4), make_rational(5, 7)};
  const BasePoint b = project_base(to_nil(g));
  CHECK(b.u == make_rational(1, 3));
  CHECK(b.v == make_rational(3, 4));
}
