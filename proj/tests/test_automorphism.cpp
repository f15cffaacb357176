#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <random>

#include "nilmodel/automorphism.hpp"
#include "nilmodel/errors.hpp"

using namespace nilmodel;

namespace {

struct Sampler {
  std::mt19937_64 rng{777};
  std::uniform_int_distribution<long long> num{-100, 100}, den{1, 30};
  std::uniform_int_distribution<long> lat{-4, 4};

  Rational q() { return make_rational(num(rng), den(rng)); }
  HeisQ g() { return {q(), q(), q()}; }
  HeisQ gamma() { return LatticeElement{lat(rng), lat(rng), lat(rng)}.point(); }
};

std::vector<IntMatrix2> unimodular_matrices(int range) {
  std::vector<IntMatrix2> out;
  for (int a = -range; a <= range; ++a)
    for (int b = -range; b <= range; ++b)
      for (int c = -range; c <= range; ++c)
        for (int d = -range; d <= range; ++d) {
          if (std::abs(a * d - b * c) != 1) continue;
          IntMatrix2 M;
          M << a, b, c, d;
          out.push_back(M);
        }
  return out;
}

ErrorCode code_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::IOError;
}

}  // namespace

TEST_CASE("f0 has the expected closed form") {
  const HeisAutomorphism phi = f0();
  IntMatrix2 A;
  A << 2, 1, 1, 1;
  CHECK(phi.M == A);
  CHECK(phi.poly.to_string() == "z+x^2+y^2/2+xy");
  const HeisQ g{make_rational(1, 3), make_rational(-2, 5), make_rational(3, 7)};
  const HeisQ img = apply(phi, g);
  CHECK(img.x == 2 * g.x + g.y);
  CHECK(img.y == g.x + g.y);
  CHECK(img.z == g.z + g.x * g.x + g.y * g.y / 2 + g.x * g.y);
}

TEST_CASE("every small unimodular matrix lifts to a lattice-preserving automorphism") {
  Sampler s;
  const auto mats = unimodular_matrices(2);
  CHECK(mats.size() > 50);
  for (const auto& M : mats) {
    for (long r2 = -1; r2 <= 1; ++r2) {
      const HeisAutomorphism phi = make_automorphism(M, r2, 1 - r2);
      CHECK(phi.det() == determinant(IntMatrix(M)));
      for (int i = 0; i < 10; ++i) {
        const HeisQ g = s.g(), h = s.g();
        CHECK(apply(phi, g * h) == apply(phi, g) * apply(phi, h));
        CHECK(in_lattice(apply(phi, s.gamma())));
      }
      // Center is scaled by det.
      const HeisQ c{0, 0, make_rational(3, 4)};
      CHECK(apply(phi, c).z == make_rational(phi.det()) * c.z);
    }
  }
}

TEST_CASE("double and exact evaluation agree") {
  Sampler s;
  const HeisAutomorphism phi = make_automorphism((IntMatrix2() << 3, 2, 1, 1).finished(), 1, -3);
  for (int i = 0; i < 50; ++i) {
    const HeisQ g = s.g();
    const HeisD a = to_double(apply(phi, g));
    const HeisD b = apply(phi, to_double(g));
    CHECK(a.x == doctest::Approx(b.x));
    CHECK(a.y == doctest::Approx(b.y));
    CHECK(a.z == doctest::Approx(b.z).epsilon(1e-12));
  }
}

TEST_CASE("composition matches pointwise composition") {
  Sampler s;
  const HeisAutomorphism phi = make_automorphism((IntMatrix2() << 2, 1, 1, 1).finished(), 1, 0);
  const HeisAutomorphism psi = make_automorphism((IntMatrix2() << 0, 1, 1, 0).finished(), -1, 3);
  const HeisAutomorphism both = compose(phi, psi);
  CHECK(abelianization(both) == phi.M * psi.M);
  for (int i = 0; i < 50; ++i) {
    const HeisQ g = s.g();
    CHECK(apply(both, g) == apply(phi, apply(psi, g)));
  }
  CHECK(compose(f0(), f0()).M == matrix_power(IntMatrix(f0().M), 2).topLeftCorner<2, 2>());
}

TEST_CASE("invalid automorphisms are rejected with the right code") {
  CHECK(code_of([] { make_automorphism((IntMatrix2() << 2, 0, 0, 1).finished(), 0, 0); }) ==
        ErrorCode::NotUnimodular);
  ZPolynomial bad;
  bad.xx = 1;  // wrong quadratic part for the identity matrix
  CHECK(code_of([&] { make_automorphism(IntMatrix2::Identity(), bad); }) == ErrorCode::HomomorphismViolation);
  ZPolynomial third;
  third.x1 = make_rational(1, 3);
  CHECK(code_of([&] { make_automorphism(IntMatrix2::Identity(), third); }) == ErrorCode::LatticeNotPreserved);
}

TEST_CASE("hyperbolicity predicate agrees with numerically computed eigenvalues") {
  for (const auto& M : unimodular_matrices(3)) {
    const Eigen::Matrix2d D = M.cast<double>();
    const auto ev = D.eigenvalues();
    const bool off_circle = std::abs(std::abs(ev(0)) - 1.0) > 1e-6 && std::abs(std::abs(ev(1)) - 1.0) > 1e-6;
    CHECK(is_hyperbolic_2x2(M) == off_circle);
    CHECK(hyperbolicity_certificate(IntMatrix(M)).hyperbolic == off_circle);
  }
}

TEST_CASE("certificate of the golden matrix") {
  const auto cert = certify_hyperbolic(IntMatrix(f0().M));
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  CHECK(cert.hyperbolic);
  CHECK(cert.lambda == doctest::Approx(phi * phi));
  CHECK(cert.lambda_s == doctest::Approx(1.0 / (phi * phi)));
  CHECK(cert.gap == doctest::Approx(1.0 - 1.0 / (phi * phi)));
  const Eigen::MatrixXd A = IntMatrix(f0().M).cast<double>();
  const Eigen::VectorXd u = cert.unstable_basis.col(0);
  const Eigen::VectorXd v = cert.stable_basis.col(0);
  CHECK((A * u - cert.lambda * u).norm() < 1e-12);
  CHECK((A * v - cert.lambda_s * v).norm() < 1e-12);
  CHECK(u.norm() == doctest::Approx(1.0));
  CHECK(cert.eigenbasis().cols() == 2);
}

TEST_CASE("certify_hyperbolic rejects parabolic and non-unimodular matrices") {
  CHECK(code_of([] { certify_hyperbolic(IntMatrix((IntMatrix2() << 1, 1, 0, 1).finished())); }) ==
        ErrorCode::NotCertified);
  CHECK(code_of([] { certify_hyperbolic(IntMatrix((IntMatrix2() << 3, 0, 0, 2).finished())); }) ==
        ErrorCode::NotUnimodular);
}

TEST_CASE("lie derivative matches a finite difference at the identity") {
  const HeisAutomorphism phi = make_automorphism((IntMatrix2() << 3, 1, 2, 1).finished(), 1, -1);
  const Eigen::Matrix3d D = lie_derivative(phi);
  const double h = 1e-6;
  for (int k = 0; k < 3; ++k) {
    HeisD p{0, 0, 0}, m{0, 0, 0};
    (k == 0 ? p.x : k == 1 ? p.y : p.z) = h;
    (k == 0 ? m.x : k == 1 ? m.y : m.z) = -h;
    const HeisD fp = apply(phi, p), fm = apply(phi, m);
    const Eigen::Vector3d col((fp.x - fm.x) / (2 * h), (fp.y - fm.y) / (2 * h), (fp.z - fm.z) / (2 * h));
    CHECK((col - D.col(k)).norm() < 1e-8);
  }
}

TEST_CASE("integer matrix helpers") {
  IntMatrix M(3, 3);
  M << 2, 1, 0, 1, 1, 0, 0, 0, 1;
  CHECK(determinant(M) == 1);
  const IntMatrix M3 = matrix_power(M, 3);
  CHECK(M3 == M * M * M);
  CHECK(matrix_power(M, 0) == IntMatrix::Identity(3, 3));
}
