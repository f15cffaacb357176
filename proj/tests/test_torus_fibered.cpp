#include <doctest.h>

#include <Eigen/LU>

#include <cmath>
#include <numbers>
#include <random>

#include "nilmodel/errors.hpp"
#include "nilmodel/fibered.hpp"

using namespace nilmodel;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

FourierSeries series(std::vector<FourierMode> m) { return FourierSeries{std::move(m)}; }

FiberedMapSpec perturbed(double base_eps, double fiber_eps) {
  FiberedMapSpec f;
  f.core = f0();
  f.base_eps = base_eps;
  f.base_modes = {series({{1, 0, 0.0, 1.0 / kTwoPi}, {0, 1, 0.3, 0.0}}),
                  series({{0, 1, 0.0, 1.0 / kTwoPi}, {1, 1, 0.0, 0.2}})};
  f.fiber_eps = fiber_eps;
  f.fiber_modes = series({{1, 1, 0.3, 0.0}, {2, -1, 0.0, 0.1}});
  return make_fibered_map(f);
}

// Coordinates of the frame X = d/dx + y d/dz, Y = d/dy, Z = d/dz at g.
Eigen::Matrix3d frame(const HeisD& g) {
  Eigen::Matrix3d F = Eigen::Matrix3d::Identity();
  F(2, 0) = g.y;
  return F;
}

Eigen::Matrix3d fd_jacobian(const FiberedMapSpec& f, const HeisD& g) {
  const double h = 1e-6;
  Eigen::Matrix3d J;
  for (int k = 0; k < 3; ++k) {
    HeisD p = g, m = g;
    (k == 0 ? p.x : k == 1 ? p.y : p.z) += h;
    (k == 0 ? m.x : k == 1 ? m.y : m.z) -= h;
    const HeisD a = evaluate_lift(f, p), b = evaluate_lift(f, m);
    J.col(k) << (a.x - b.x) / (2 * h), (a.y - b.y) / (2 * h), (a.z - b.z) / (2 * h);
  }
  return J;
}

}  // namespace

TEST_CASE("fourier gradient matches finite differences and respects its bounds") {
  const FourierSeries s = series({{1, 0, 0.5, -0.2}, {2, -3, 0.1, 0.4}, {0, 4, -0.3, 0.0}});
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector2d p(u(rng), u(rng));
    const double h = 1e-6;
    const Eigen::Vector2d fd((s.value(p + Eigen::Vector2d(h, 0)) - s.value(p - Eigen::Vector2d(h, 0))) / (2 * h),
                             (s.value(p + Eigen::Vector2d(0, h)) - s.value(p - Eigen::Vector2d(0, h))) / (2 * h));
    CHECK((fd - s.gradient(p)).norm() < 1e-7);
    Eigen::Vector2d g;
    CHECK(s.value_gradient(p, g) == doctest::Approx(s.value(p)));
    CHECK((g - s.gradient(p)).norm() < 1e-12);
    CHECK(std::abs(s.value(p)) <= s.amplitude_bound());
    CHECK(s.gradient(p).norm() <= s.gradient_bound());
    CHECK(s.value(p + Eigen::Vector2d(1, -2)) == doctest::Approx(s.value(p)).epsilon(1e-12));
  }
}

TEST_CASE("periodic grid interpolation is exact at nodes and third-order accurate") {
  auto field = [](const Eigen::Vector2d& p) { return std::sin(kTwoPi * p.x()) * std::cos(kTwoPi * (p.x() + 2 * p.y())); };
  auto error_at = [&](int n) {
    PeriodicGrid g(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) g.at(i, j) = field(g.node(i, j));
    for (int i = 0; i < n; ++i) CHECK(g(g.node(i, 3)) == g.at(i, 3));
    CHECK(g(Eigen::Vector2d(0.3, 0.7)) == doctest::Approx(g(Eigen::Vector2d(1.3, -0.3))).epsilon(1e-12));
    double worst = 0.0;
    for (int k = 0; k < 400; ++k) {
      const Eigen::Vector2d p(std::fmod(k * 0.6180339887, 1.0), std::fmod(k * 0.4142135623, 1.0));
      worst = std::max(worst, std::abs(g(p) - field(p)));
    }
    return worst;
  };
  const double e32 = error_at(32), e64 = error_at(64);
  CHECK(e64 < 1e-3);
  CHECK(e32 / e64 > 6.0);  // third order or better
}

TEST_CASE("sup norms and distances on grids") {
  PeriodicGrid a(8, 1.0), b(8, 1.0);
  b.at(2, 5) = -2.5;
  CHECK(b.sup_norm() == 2.5);
  CHECK(sup_distance(a, b) == 3.5);
  PeriodicGrid2 v(4);
  v.set(1, 1, {0.5, -0.75});
  CHECK(v.sup_norm() == doctest::Approx(std::hypot(0.5, 0.75)));  // Euclidean norm per node
}

TEST_CASE("torus map lift is equivariant and its inverse round-trips") {
  const TorusMap f = induced_base_map(perturbed(0.05, 0.0));
  CHECK_FALSE(f.is_linear());
  CHECK(f.min_jacobian_determinant() > 0.5);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector2d x(u(rng), u(rng));
    const Eigen::Vector2d e(std::round(u(rng)), std::round(u(rng)));
    CHECK((f.lift(x + e) - f.lift(x) - f.linear_d() * e).norm() < 1e-12);
    CHECK((f.inverse_lift(f.lift(x)) - x).norm() < 1e-10);
    const double h = 1e-6;
    Eigen::Matrix2d J;
    J.col(0) = (f.lift(x + Eigen::Vector2d(h, 0)) - f.lift(x - Eigen::Vector2d(h, 0))) / (2 * h);
    J.col(1) = (f.lift(x + Eigen::Vector2d(0, h)) - f.lift(x - Eigen::Vector2d(0, h))) / (2 * h);
    CHECK((J - f.jacobian(x)).norm() < 1e-7);
  }
  CHECK(induced_matrix(f) == f0().M);
}

TEST_CASE("induced matrix of an arbitrary lift") {
  IntMatrix2 A;
  A << 3, 1, 2, 1;
  const LiftFunction lift = [&](const Eigen::Vector2d& x) {
    return Eigen::Vector2d(A.cast<double>() * x + Eigen::Vector2d(0.1 * std::sin(kTwoPi * x.y()), 0.05));
  };
  CHECK(induced_matrix(lift) == A);
  const LiftFunction not_a_lift = [](const Eigen::Vector2d& x) { return Eigen::Vector2d(1.5 * x); };
  CHECK_THROWS_AS(induced_matrix(not_a_lift), Error);
}

TEST_CASE("grid-displacement torus maps interpolate their Fourier counterparts") {
  const TorusMap f = induced_base_map(perturbed(0.05, 0.0));
  const int n = 64;
  PeriodicGrid2 grid(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) grid.set(i, j, f.periodic_part(grid.c0.node(i, j)));
  const TorusMap g(f.linear(), grid);
  for (double t = 0.0; t < 1.0; t += 0.0731) {
    const Eigen::Vector2d x(t, std::fmod(3.3 * t, 1.0));
    CHECK((g.lift(x) - f.lift(x)).norm() < 1e-5);
  }
}

TEST_CASE("fibered map descends to the nilmanifold") {
  const FiberedMapSpec f = perturbed(0.05, 0.05);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  std::uniform_int_distribution<long> lat(-3, 3);
  for (int i = 0; i < 200; ++i) {
    const HeisD g{u(rng), u(rng), u(rng)};
    const LatticeElement gamma{lat(rng), lat(rng), lat(rng)};
    const HeisD lhs = evaluate_lift(f, g * to_double(gamma.point()));
    const HeisD rhs = evaluate_lift(f, g) * to_double(apply(f.core, gamma.point()));
    CHECK(std::abs(lhs.x - rhs.x) < 1e-11);
    CHECK(std::abs(lhs.y - rhs.y) < 1e-11);
    CHECK(std::abs(lhs.z - rhs.z) < 1e-10);
  }
}

TEST_CASE("unperturbed fibered map is the automorphism itself") {
  FiberedMapSpec f;
  f.core = f0();
  f = make_fibered_map(f);
  CHECK_FALSE(f.has_perturbation());
  const HeisQ g{make_rational(2, 7), make_rational(5, 9), make_rational(1, 11)};
  CHECK(evaluate(f, to_nil(g)) == to_nil(apply(f0(), g)));
}

TEST_CASE("coordinate and frame jacobians agree with independent computations") {
  const FiberedMapSpec f = perturbed(0.05, 0.05);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const HeisD g{u(rng), u(rng), 0.5 * u(rng)};
    const Eigen::Matrix3d Jc = jacobian_coords(f, g);
    CHECK((Jc - fd_jacobian(f, g)).norm() < 1e-6);
    const Eigen::Matrix3d oracle = frame(evaluate_lift(f, g)).inverse() * Jc * frame(g);
    CHECK((jacobian_frame(f, g) - oracle).norm() < 1e-10);
  }
  // For the automorphism the frame jacobian is constant and equals the Lie derivative.
  FiberedMapSpec lin;
  lin.core = f0();
  lin = make_fibered_map(lin);
  const Eigen::Matrix3d D = jacobian_frame(lin, HeisD{0.3, 0.8, 0.1});
  CHECK((D - lie_derivative(f0())).norm() < 1e-12);
}

TEST_CASE("partial hyperbolicity holds for small perturbations and fails for large ones") {
  const auto cert = certify_hyperbolic(IntMatrix(f0().M));
  const ConeParams cones = ConeParams::from_certificate(cert, 20.0 * std::numbers::pi / 180.0);
  const PHReport ok = verify_partial_hyperbolicity(perturbed(0.05, 0.05), cones, 12);
  CHECK(ok.pass);
  CHECK(ok.worst_margin() > 0.0);
  CHECK(ok.min_unstable_expansion > 1.0);
  CHECK(ok.max_stable_contraction < 1.0);
  CHECK(ok.min_unstable_expansion > ok.max_center_rate);
  CHECK(ok.max_stable_contraction < ok.min_center_rate);

  FiberedMapSpec big;
  big.core = f0();
  big.base_eps = 0.9;
  // Rotational shear that tilts the unstable direction out of its cone.
  big.base_modes = {series({{0, 1, 0.0, 1.0 / kTwoPi}}), series({{1, 0, 0.0, -1.0 / kTwoPi}})};
  const PHReport bad = verify_partial_hyperbolicity(make_fibered_map(big), cones, 12);
  CHECK_FALSE(bad.pass);
  CHECK(bad.worst_margin() < 0.0);
}
