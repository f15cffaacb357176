#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "nilmodel/bundle.hpp"
#include "nilmodel/errors.hpp"

using namespace nilmodel;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
const IntMatrix2 kA = (IntMatrix2() << 2, 1, 1, 1).finished();

// Non-rotation coboundary, smooth in x inside each chart.
Coboundary wiggly() {
  return [](int i, const Eigen::Vector2d& x) {
    const double m = 1.0 + 0.5 * std::sin(kTwoPi * (x.x() + 2 * x.y()));
    return CircleDiffeo::basic(0.1 * i + 0.05 * std::cos(kTwoPi * x.y()),
                               {{1, 0.04 * m, 0.0}, {2, 0.0, 0.02 * (i + 1) * m / 4}});
  };
}

std::vector<Eigen::Vector2d> samples(int n, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Eigen::Vector2d> out;
  for (int k = 0; k < n; ++k) out.emplace_back(u(rng), u(rng));
  return out;
}

}  // namespace

TEST_CASE("circle diffeomorphisms: lifts, inverses, derivatives") {
  const CircleDiffeo f = CircleDiffeo::basic(0.3, {{1, 0.05, 0.02}, {3, 0.0, 0.01}});
  const CircleDiffeo g = CircleDiffeo::rotation(-0.7).compose(f);
  for (double t = -1.3; t < 2.0; t += 0.137) {
    CHECK(f(t + 1) == doctest::Approx(f(t) + 1).epsilon(1e-13));
    CHECK(f.inverse()(f(t)) == doctest::Approx(t).epsilon(1e-12));
    CHECK(g(t) == doctest::Approx(f(t) - 0.7).epsilon(1e-13));
    const double h = 1e-6;
    CHECK(f.derivative(t) == doctest::Approx((f(t + h) - f(t - h)) / (2 * h)).epsilon(1e-8));
    CHECK(f.derivative(t) > 0.0);
  }
  CHECK(f.rotation_part() == doctest::Approx(0.3));
  CHECK_FALSE(f.as_rotation());
  CHECK(CircleDiffeo::rotation(0.25).compose(CircleDiffeo::rotation(0.5)).as_rotation().value() ==
        doctest::Approx(0.75));
  CHECK(CircleDiffeo::rotation(0.4).wiggle_norm() < 1e-15);
  CHECK(f.wiggle_norm() > 0.04);
  CHECK_THROWS_AS(CircleDiffeo::basic(0.0, {{1, 0.2, 0.0}}), Error);  // 2 pi * 0.2 > 1
}

TEST_CASE("circle distance") {
  CHECK(circle_distance(0.05, 0.95) == doctest::Approx(0.1));
  CHECK(circle_distance(3.2, -0.8) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(circle_distance(0.0, 0.5) == doctest::Approx(0.5));
}

TEST_CASE("standard cover and its partition of unity") {
  const Cover c = Cover::standard();
  CHECK(c.size() == 4);
  for (const auto& x : samples(2000, 1)) {
    const auto phi = c.partition_of_unity(x);
    double sum = 0.0;
    for (int i = 0; i < c.size(); ++i) {
      CHECK(phi[std::size_t(i)] >= 0.0);
      if (phi[std::size_t(i)] > 0.0) CHECK(c.contains(i, x));
      sum += phi[std::size_t(i)];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    const int k = c.canonical(x);
    CHECK(c.contains(k, x));
    for (int i = 0; i < k; ++i) CHECK_FALSE(c.contains(i, x));
    const int d = c.deepest(x);
    for (int i : c.charts_containing(x)) CHECK(c.depth(d, x) >= c.depth(i, x));
    const Eigen::Vector2d loc = c.local(k, x);
    CHECK(wrap(loc).isApprox(x, 1e-14));
  }
}

TEST_CASE("twist cocycles satisfy the cocycle identities exactly") {
  const Cover c = Cover::standard();
  for (int k : {-2, 0, 1, 2, 3}) {
    const CircleCocycle tau = twist_cocycle(c, k);
    CHECK(tau.rotation_valued());
    CHECK(check_cocycle(tau, 500).max() < 1e-12);
    CHECK(check_cocycle_exact(tau, 200) == 0);
  }
  CHECK(check_cocycle(identity_cocycle(c), 200).max() == 0.0);
}

TEST_CASE("euler number is the twist, with sign") {
  const Cover c = Cover::standard();
  CHECK(euler_number(identity_cocycle(c)) == 0);
  for (int k : {-3, -1, 1, 2, 5}) CHECK(euler_number(twist_cocycle(c, k)) == k);
  const Cover fine = Cover::standard(make_rational(1, 5));
  CHECK(euler_number(twist_cocycle(fine, 2)) == 2);
}

TEST_CASE("coboundaries preserve the cocycle property and are undone by their inverse") {
  const Cover c = Cover::standard();
  const CircleCocycle tau = twist_cocycle(c, 2);
  const CircleCocycle twisted = apply_coboundary(tau, wiggly());
  CHECK(check_cocycle(twisted, 300).max() < 1e-10);
  CHECK(cocycle_distance(twisted, tau, 300) > 1e-3);
  const CircleCocycle back = apply_coboundary(twisted, inverse_coboundary(wiggly()));
  CHECK(cocycle_distance(back, tau, 300) < 1e-10);
}

TEST_CASE("reduction to rotations recovers a rotation cocycle in the same class") {
  const Cover c = Cover::standard();
  const CircleCocycle planted = apply_coboundary(twist_cocycle(c, 2), wiggly());
  const Reduction red = reduce_to_rotations(planted, 500);
  CHECK(red.residual < 1e-8);
  CHECK(check_cocycle(red.rotations, 300).max() < 1e-8);
  for (const auto& x : samples(50, 7))
    for (int i : c.charts_containing(x))
      for (int j : c.charts_containing(x)) CHECK(red.rotations(i, j, x).wiggle_norm() < 1e-8);
  CHECK(euler_number(red.rotations) == 2);
  CHECK(rotation_coboundary(red.rotations, twist_cocycle(c, 2), 500).residual < 1e-8);
}

TEST_CASE("rotation coboundary detects a different class") {
  const Cover c = Cover::standard();
  const RotationCoboundary same = rotation_coboundary(twist_cocycle(c, 2), twist_cocycle(c, 2), 500);
  CHECK(same.residual < 1e-12);
  const RotationCoboundary wrong = rotation_coboundary(twist_cocycle(c, 2), twist_cocycle(c, 1), 500);
  CHECK(wrong.residual > 0.4);
}

TEST_CASE("nilmanifold and twist-2 bundle coordinates round-trip") {
  const Cover c = Cover::standard();
  const CircleCocycle tau = twist_cocycle(c, 2);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int k = 0; k < 500; ++k) {
    const HeisD g{u(rng), u(rng), u(rng)};
    const BundlePoint p = nil_to_bundle(c, g);
    CHECK(c.contains(p.chart, p.base));
    const HeisD back = bundle_to_nil(c, p);
    const HeisD a = reduce_numeric(g), b = reduce_numeric(back);
    const double d = std::abs(a.x - b.x) + std::abs(a.y - b.y) + circle_distance(2 * a.z, 2 * b.z);
    CHECK(d < 1e-9);
    for (int j : c.charts_containing(p.base)) {
      const BundlePoint q = to_chart(tau, p, j);
      CHECK(q.chart == j);
      CHECK(circle_distance(to_chart(tau, q, p.chart).theta, p.theta) < 1e-12);
      // Same point of M whichever chart describes it.
      const HeisD r = reduce_numeric(bundle_to_nil(c, q));
      CHECK(std::abs(r.x - a.x) + std::abs(r.y - a.y) + circle_distance(2 * r.z, 2 * a.z) < 1e-9);
    }
    CHECK(canonical(tau, p).chart == c.canonical(p.base));
  }
}

TEST_CASE("pullback by the identity conjugacy keeps the euler number") {
  const Cover c = Cover::standard();
  const CircleCocycle pulled = pullback_cocycle(twist_cocycle(c, 2), DisplacementField::identity(64));
  CHECK(check_cocycle(pulled, 300).max() < 1e-10);
  CHECK(euler_number(pulled) == 2);
}

TEST_CASE("smooth model covers A and rotates fibers") {
  const Cover c = Cover::standard();
  const SmoothModel g = build_smooth_model(kA, twist_cocycle(c, 2));
  CHECK(g.consistency < 1e-8);
  CHECK(g.twist == 2);
  for (const auto& x : samples(200, 5)) {
    const BundlePoint p{c.canonical(x), x, 0.37};
    const BundlePoint q = g(p);
    CHECK(torus_distance(q.base, wrap(kA.cast<double>() * x)) < 1e-12);
    CHECK(g.fiber_derivative(p) == 1.0);
    // Fibers move rigidly: theta differences are preserved.
    BundlePoint p2 = p;
    p2.theta = 0.81;
    const BundlePoint q2 = to_chart(g.tau, g(p2), q.chart);
    CHECK(circle_distance(q2.theta - q.theta, 0.81 - 0.37) < 1e-12);
  }
}

TEST_CASE("smooth model agrees with the automorphism in bundle coordinates") {
  const Cover c = Cover::standard();
  FiberedMapSpec spec;
  spec.core = f0();
  spec = make_fibered_map(spec);
  const BundleMap fhat = fibered_bundle_map(spec, c);
  const SmoothModel g = build_smooth_model(kA, twist_cocycle(c, 2));
  CHECK(g.r2 == 0);
  CHECK(g.s2 == 0);
  for (const auto& x : samples(200, 8)) {
    const BundlePoint p{c.canonical(x), x, 0.21};
    const BundlePoint a = fhat(p);
    const BundlePoint b = to_chart(g.tau, g(p), a.chart);
    CHECK(torus_distance(a.base, b.base) < 1e-12);
    CHECK(circle_distance(a.theta, b.theta) < 1e-9);
  }
}

TEST_CASE("smooth model rejects inconsistent data") {
  const Cover c = Cover::standard();
  const IntMatrix2 flip = (IntMatrix2() << 1, 1, 1, 0).finished();  // det -1
  try {
    build_smooth_model(flip, twist_cocycle(c, 2));
    FAIL("expected InconsistentRotationField");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InconsistentRotationField);
  }
  CHECK_NOTHROW(build_smooth_model(flip, identity_cocycle(c)));
  const IntMatrix2 parabolic = (IntMatrix2() << 1, 1, 0, 1).finished();
  try {
    build_smooth_model(parabolic, twist_cocycle(c, 2));
    FAIL("expected NotHyperbolic");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotHyperbolic);
  }
}
