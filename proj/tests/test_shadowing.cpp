#include <doctest.h>

#include <cmath>
#include <numbers>

#include "nilmodel/errors.hpp"
#include "nilmodel/shadowing.hpp"

using namespace nilmodel;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
const IntMatrix2 kA = (IntMatrix2() << 2, 1, 1, 1).finished();

TorusMap nonlinear(double eps) {
  std::array<FourierSeries, 2> modes{FourierSeries{{{1, 0, 0.0, 1.0 / kTwoPi}}},
                                     FourierSeries{{{0, 1, 0.0, 1.0 / kTwoPi}, {1, 1, 0.3, 0.0}}}};
  return TorusMap(kA, modes, eps);
}

// For the symmetric golden matrix the eigenprojections are orthogonal, and
// the correction sums are geometric with ratios 1/lambda and lambda_s:
// eps <= delta * sqrt((1/(lambda-1))^2 + (1/(1-lambda_s))^2).
double linear_shadow_bound() {
  const double lambda = (3.0 + std::sqrt(5.0)) / 2.0;
  return std::hypot(1.0 / (lambda - 1.0), 1.0 / (1.0 - 1.0 / lambda));
}

}  // namespace

TEST_CASE("pseudo-orbits respect delta and depend only on the seed") {
  const TorusMap f = nonlinear(0.05);
  const PseudoOrbit a = generate_pseudo_orbit(f, {0.1, 0.2}, 500, 1e-3, 42);
  const PseudoOrbit b = generate_pseudo_orbit(f, {0.1, 0.2}, 500, 1e-3, 42);
  const PseudoOrbit c = generate_pseudo_orbit(f, {0.1, 0.2}, 500, 1e-3, 43);
  CHECK(a.points.size() == 501);
  CHECK(a.points == b.points);
  CHECK(a.points != c.points);
  CHECK(a.delta <= 1e-3);
  CHECK(a.delta == max_jump(f, a.points));
  for (const auto& p : a.points) {
    CHECK(p.x() >= 0.0);
    CHECK(p.x() < 1.0);
  }
}

TEST_CASE("linear shadowing obeys the geometric-series bound") {
  const TorusMap f(kA);
  const auto cert = certify_hyperbolic(IntMatrix(kA));
  for (unsigned long long seed = 1; seed <= 5; ++seed) {
    const PseudoOrbit po = generate_pseudo_orbit(f, {0.3, 0.7}, 2000, 1e-4, seed);
    const ShadowingResult r = shadow(f, cert, po);
    CHECK(r.residual < 1e-12);
    CHECK(r.epsilon <= po.delta * linear_shadow_bound() + 1e-15);
    CHECK(r.orbit.size() == po.points.size());
    CHECK(torus_distance(r.orbit.front(), r.shadow_start) < 1e-15);
  }
}

TEST_CASE("shadowing distance scales linearly with delta") {
  const TorusMap f = nonlinear(0.05);
  const auto cert = certify_hyperbolic(IntMatrix(kA));
  const ShadowingResult small = shadow(f, cert, generate_pseudo_orbit(f, {0.4, 0.1}, 1000, 1e-5, 9));
  const ShadowingResult large = shadow(f, cert, generate_pseudo_orbit(f, {0.4, 0.1}, 1000, 1e-4, 9));
  CHECK(small.residual < 1e-12);
  CHECK(large.residual < 1e-12);
  CHECK(large.epsilon / small.epsilon == doctest::Approx(10.0).epsilon(0.05));
  CHECK(large.passes >= 2);
}

TEST_CASE("a true orbit is its own shadow") {
  const TorusMap f = nonlinear(0.05);
  const auto cert = certify_hyperbolic(IntMatrix(kA));
  PseudoOrbit po;
  po.points.push_back({0.25, 0.6});
  for (int i = 0; i < 30; ++i) po.points.push_back(f(po.points.back()));
  po.delta = max_jump(f, po.points);
  const ShadowingResult r = shadow(f, cert, po);
  CHECK(r.epsilon < 1e-9);
}

TEST_CASE("shadowing requires a hyperbolic linear part") {
  const IntMatrix2 P = (IntMatrix2() << 1, 1, 0, 1).finished();
  const TorusMap f(P);
  PseudoOrbit po = generate_pseudo_orbit(f, {0.1, 0.1}, 10, 1e-4, 1);
  CHECK_THROWS_AS(shadow(f, hyperbolicity_certificate(IntMatrix(P)), po), Error);
}

TEST_CASE("expansivity witness is positive and monotone in the horizon") {
  const TorusMap f = nonlinear(0.05);
  const double c10 = expansivity_probe(f, 300, 10);
  const double c20 = expansivity_probe(f, 300, 20);
  CHECK(c10 > 0.0);
  CHECK(c20 >= c10);
  CHECK(c20 <= 0.5 * std::sqrt(2.0));
}

TEST_CASE("stable and unstable leaves of the linear model meet where expected") {
  const TorusMap f(kA);
  const DisplacementField h = DisplacementField::identity(64);
  const Eigen::Vector2d x(0.2, 0.3), y(0.22, 0.31);
  const IntersectionResult r = product_structure_intersect(f, h, x, y);
  CHECK(torus_distance(r.point, r.linear_point) < 1e-12);
  CHECK(r.forward_residual < 1e-6);
  CHECK(r.backward_residual < 1e-6);
  // Independent check: z - x is along e_s and z - y along e_u.
  const auto cert = certify_hyperbolic(IntMatrix(kA));
  const Eigen::Vector2d eu = cert.unstable_basis.col(0), es = cert.stable_basis.col(0);
  const Eigen::Vector2d dx = torus_difference(r.point, x), dy = torus_difference(r.point, y);
  CHECK(std::abs(eu.dot(dx)) < 1e-12);
  CHECK(std::abs(es.dot(dy)) < 1e-12);
}
