#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "nilmodel/errors.hpp"
#include "nilmodel/lefschetz.hpp"

using namespace nilmodel;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
const IntMatrix2 kA = (IntMatrix2() << 2, 1, 1, 1).finished();

// Lucas numbers: |det(A^m - I)| = L_{2m} - 2 for the golden matrix.
long long lucas(int n) {
  long long a = 2, b = 1;
  for (int i = 0; i < n; ++i) {
    const long long c = a + b;
    a = b;
    b = c;
  }
  return a;
}

bool fixed_exactly(const IntMatrix& A, const BasePoint& p) {
  const Rational x = p.u, y = p.v;
  const Rational ax = Rational(static_cast<long>(A(0, 0))) * x + Rational(static_cast<long>(A(0, 1))) * y - x;
  const Rational ay = Rational(static_cast<long>(A(1, 0))) * x + Rational(static_cast<long>(A(1, 1))) * y - y;
  return ax.get_den() == 1 && ay.get_den() == 1;
}

}  // namespace

TEST_CASE("smith normal form of random integer matrices") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> e(-9, 9);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 3;
    IntMatrix M(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) M(i, j) = e(rng);
    const SmithNormalForm s = smith_normal_form(M);
    CHECK(s.U * M * s.V == s.D);
    CHECK(std::llabs(determinant(s.U)) == 1);
    CHECK(std::llabs(determinant(s.V)) == 1);
    const auto d = s.diagonal();
    long long prod = 1;
    for (std::size_t k = 0; k < d.size(); ++k) {
      CHECK(d[k] >= 0);
      if (k + 1 < d.size() && d[k] != 0) CHECK(d[k + 1] % d[k] == 0);
      prod *= d[k];
    }
    CHECK(prod == std::llabs(determinant(M)));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j) CHECK(s.D(i, j) == 0);
  }
}

TEST_CASE("fixed point counts of the golden matrix follow the Lucas numbers") {
  const std::vector<long long> expected{1, 5, 16, 45};
  for (int m = 1; m <= 8; ++m) {
    const IntMatrix Am = matrix_power(IntMatrix(kA), m);
    const LefschetzReport r = lefschetz_report(IntMatrix(kA), m);
    CHECK(std::llabs(r.lefschetz) == lucas(2 * m) - 2);
    if (m <= 4) CHECK(r.count == expected[m - 1]);
    CHECK(r.count == std::llabs(r.lefschetz));
    CHECK(r.eigen_product == doctest::Approx(double(r.count)).epsilon(1e-9));
    std::set<std::pair<std::string, std::string>> distinct;
    for (const auto& p : r.fixed_points) {
      CHECK(fixed_exactly(Am, p));
      CHECK(p.u >= 0);
      CHECK(p.u < 1);
      distinct.insert({p.u.get_str(), p.v.get_str()});
    }
    CHECK(distinct.size() == r.fixed_points.size());
  }
}

TEST_CASE("lefschetz number matches the characteristic polynomial") {
  for (const auto& A : {kA, IntMatrix2((IntMatrix2() << 3, 2, 1, 1).finished()),
                        IntMatrix2((IntMatrix2() << 0, 1, 1, 1).finished()),
                        IntMatrix2((IntMatrix2() << 1, 1, 1, 0).finished())}) {
    for (int m = 1; m <= 5; ++m) {
      const IntMatrix Am = matrix_power(IntMatrix(A), m);
      // det(I - B) = 1 - tr B + det B for 2x2 B.
      const long long oracle = 1 - Am.trace() + determinant(Am);
      CHECK(lefschetz_number(IntMatrix(A), m) == oracle);
    }
  }
}

TEST_CASE("three-dimensional lefschetz numbers; enumeration stays on the 2-torus") {
  IntMatrix A(3, 3);
  A << 2, 1, 0, 1, 1, 1, 0, 1, 1;
  const long long L = lefschetz_number(A, 1);
  CHECK_THROWS_AS(enumerate_fixed_points(A, 1), Error);
  const Eigen::Matrix3d D = A.cast<double>();
  const auto ev = D.eigenvalues();
  double prod = 1.0;
  for (int i = 0; i < 3; ++i) prod *= std::abs(1.0 - ev(i));
  CHECK(prod == doctest::Approx(double(std::llabs(L))));
}

TEST_CASE("a matrix with eigenvalue one at period m is singular") {
  const IntMatrix R = IntMatrix((IntMatrix2() << 0, -1, 1, 0).finished());  // order 4
  CHECK_NOTHROW(enumerate_fixed_points(R, 1));
  try {
    enumerate_fixed_points(R, 4);
    FAIL("expected SingularAtM");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularAtM);
  }
}

TEST_CASE("perturbed periodic points are refined to the full count") {
  std::array<FourierSeries, 2> modes{FourierSeries{{{1, 0, 0.0, 1.0 / kTwoPi}}},
                                     FourierSeries{{{0, 1, 0.0, 1.0 / kTwoPi}}}};
  const TorusMap f(kA, modes, 0.05);
  const auto cert = certify_hyperbolic(IntMatrix(kA));
  const auto [h, rep] = solve_semiconjugacy(f, kA, cert, 64, 1e-13);
  for (int m = 1; m <= 3; ++m) {
    const PeriodicRefinement r = refine_periodic_points(f, kA, h, m);
    CHECK(static_cast<long long>(r.points.size()) == r.expected);
    CHECK(r.expected == lucas(2 * m) - 2);
    CHECK(r.max_residual < 1e-10);
    for (std::size_t i = 0; i < r.points.size(); ++i) {
      Eigen::Vector2d y = r.points[i];
      for (int k = 0; k < m; ++k) y = f(y);
      CHECK(torus_distance(y, r.points[i]) < 1e-10);
      for (std::size_t j = 0; j < i; ++j) CHECK(torus_distance(r.points[i], r.points[j]) > 1e-9);
    }
  }
}
