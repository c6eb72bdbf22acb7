#include <cmath>
#include <random>

#include "doctest.h"
#include "hjsing/action.hpp"
#include "hjsing/errors.hpp"

using namespace hjsing;

namespace {

const Hamiltonian& eikonal() {
  static const Hamiltonian h = make_mechanical(Mat2::identity(), -0.5);
  return h;
}

// Closed-form action of H = |p|^2/2 + w^2|x|^2/2 (the Mehler kernel),
// valid for w t < pi.
double oscillator_action(double w, double t, Vec2 x, Vec2 y) {
  const double c = std::cos(w * t), s = std::sin(w * t);
  auto one = [&](double a, double b) { return w / (2 * s) * ((a * a + b * b) * c - 2 * a * b); };
  return one(x.x1, y.x1) + one(x.x2, y.x2);
}

Hamiltonian oscillator(double w) {
  MechanicalSpec spec;
  spec.a = [](Vec2) { return Mat2::identity(); };
  spec.v = [w](Vec2 x) { return 0.5 * w * w * norm2(x); };
  spec.dv = [w](Vec2 x) { return w * w * x; };
  spec.constant_a = true;
  spec.region = {{-3, -3}, {3, 3}};
  return make_mechanical(spec);
}

double corner(Vec2 y) { return std::min(y.x1, y.x2); }

}  // namespace

TEST_CASE("free-particle action") {
  const auto r = fundamental_solution(eikonal(), 1.0, {0, 0}, {1, 0}, 16);
  CHECK(r.converged);
  CHECK(r.value == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t k = 0; k < r.minimizer.nodes.size(); ++k) {
    const Vec2 expect{static_cast<double>(k) / 16.0, 0.0};
    CHECK(distance(r.minimizer.nodes[k], expect) < 1e-9);
  }
  const auto still = fundamental_solution(eikonal(), 0.5, {2, 3}, {2, 3}, 8);
  CHECK(still.value == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("anisotropic action against the closed form under refinement") {
  const auto h = make_mechanical(Mat2::diag(2, 1), -0.5);
  for (int n : {8, 16, 32}) {
    const auto r = fundamental_solution(h, 1.0, {0, 0}, {1, 0}, n);
    CHECK(r.converged);
    CHECK(r.value == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(r.minimizer.action_value == doctest::Approx(0.75).epsilon(1e-10));
  }
}

TEST_CASE("preconditions") {
  CHECK_THROWS_AS(fundamental_solution(eikonal(), 0.0, {0, 0}, {1, 0}), PreconditionError);
  CHECK_THROWS_AS(fundamental_solution(eikonal(), 1.0, {0, 0}, {1, 0}, 0), PreconditionError);
}

TEST_CASE("position-dependent action matches the Mehler kernel") {
  const double w = 1.3;
  const auto h = oscillator(w);
  const Vec2 x{0.4, -0.2}, y{-0.3, 0.5};
  const double t = 0.9;
  const double exact = oscillator_action(w, t, x, y);
  double previous = std::numeric_limits<double>::infinity();
  for (int n : {8, 16, 32}) {
    const auto r = fundamental_solution(h, t, x, y, n);
    CHECK(r.converged);
    CHECK(r.shooting.converged);
    CHECK(r.value == doctest::Approx(exact).epsilon(1e-8));
    // The discrete minimum converges at second order.
    CHECK(std::abs(r.minimizer.action_value - exact) < 2.0 / (n * n));
    CHECK(r.value <= previous + 1e-12);
    previous = r.value;
    CHECK(r.el_residual < 1e-6);
    const Lagrangian l = legendre(h);
    CHECK(std::abs(discrete_action(l, r.minimizer.nodes, 0.0, t) - r.minimizer.action_value) < 1e-12);
  }
}

TEST_CASE("value never exceeds the straight-line action") {
  const auto h = oscillator(1.0);
  const ActionEvaluator a(h, 0.7, 16);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(-1, 1);
  for (int k = 0; k < 10; ++k) {
    const Vec2 x{U(rng), U(rng)}, y{U(rng), U(rng)};
    const auto r = fundamental_solution(h, 0.7, x, y, 16);
    CHECK(r.value <= a.straight(x, y) + 1e-12);
    CHECK(r.minimizer.action_value <= a.straight(x, y) + 1e-12);
  }
}

TEST_CASE("triangle inequality of the action") {
  const auto h = oscillator(0.8);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> U(-1, 1);
  for (int k = 0; k < 10; ++k) {
    const Vec2 x{U(rng), U(rng)}, y{U(rng), U(rng)}, z{U(rng), U(rng)};
    const double t = 0.3 + 0.2 * (U(rng) + 1), s = 0.3 + 0.2 * (U(rng) + 1);
    const double lhs = fundamental_solution(h, t + s, x, z, 16).value;
    const double rhs = fundamental_solution(h, t, x, y, 16).value +
                       fundamental_solution(h, s, y, z, 16).value;
    CHECK(lhs <= rhs + 1e-6);
  }
}

TEST_CASE("the exact corner solution is dominated by L along sampled curves") {
  const Lagrangian l = legendre(eikonal());
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> U(-1, 1);
  for (int k = 0; k < 200; ++k) {
    std::vector<Vec2> nodes{{U(rng), U(rng)}};
    for (int j = 0; j < 6; ++j) nodes.push_back(nodes.back() + 0.3 * Vec2{U(rng), U(rng)});
    const double t = 0.2 + (U(rng) + 1);
    const double integral = discrete_action(l, nodes, 0.0, t);
    CHECK(corner(nodes.back()) - corner(nodes.front()) <= integral + 1e-6);
  }
}

TEST_CASE("negative Lax-Oleinik examples") {
  const auto zero = [](Vec2) { return 0.0; };
  const Vec2 x{0.3, -0.2};
  auto r = lax_oleinik_neg(eikonal(), zero, 1.0, x, Box2::around(x, 2.0));
  CHECK(r.value == doctest::Approx(0.5).epsilon(1e-9));
  CHECK_FALSE(r.boundary_hit);

  const auto linear = [](Vec2 y) { return y.x1; };
  r = lax_oleinik_neg(eikonal(), linear, 1.0, x, Box2::around(x, 3.0));
  CHECK(r.value == doctest::Approx(x.x1).epsilon(1e-9));
  CHECK(distance(r.argmin, x - Vec2{1, 0}) < 1e-4);

  r = lax_oleinik_neg(eikonal(), linear, 1.0, x, Box2::around(x, 0.5));
  CHECK(r.boundary_hit);
}

TEST_CASE("the corner solution is a fixed point of the negative evolution") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> U(-2, 2);
  for (double t : {0.1, 0.5, 1.0}) {
    for (int k = 0; k < 10; ++k) {
      const Vec2 x{U(rng), U(rng)};
      const auto r = lax_oleinik_neg(eikonal(), corner, t, x, Box2::around(x, 2.5 * t));
      CHECK(std::abs(r.value - corner(x)) < 1e-4);
    }
  }
}

TEST_CASE("positive Lax-Oleinik on the corner against a brute-force grid") {
  const Vec2 x{1, 1};
  const double t = 0.2;
  LaxOleinikOptions opt;
  opt.t0 = 0.25;
  const Box2 box = lax_oleinik_box(x, t, 2.0);
  const auto r = lax_oleinik_pos(eikonal(), corner, t, x, box, opt, 2.0);
  CHECK(r.unique);
  CHECK_FALSE(r.boundary_hit);

  // Oracle: exhaustive grid over the same box.
  const int n = 801;
  double best = -1e300;
  Vec2 arg;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Vec2 y{box.lo.x1 + (box.hi.x1 - box.lo.x1) * i / (n - 1),
                   box.lo.x2 + (box.hi.x2 - box.lo.x2) * j / (n - 1)};
      const double f = corner(y) - norm2(y - x) / (2 * t) - t / 2;
      if (f > best) {
        best = f;
        arg = y;
      }
    }
  }
  const double spacing = (box.hi.x1 - box.lo.x1) / (n - 1);
  CHECK(distance(r.argmax, arg) <= 2 * spacing);
  CHECK(distance(r.argmax, {1.1, 1.1}) < 1e-6);
  CHECK(r.value == doctest::Approx(best).epsilon(1e-6));
}

TEST_CASE("positive Lax-Oleinik follows the characteristic at smooth points") {
  // u(y) = <p, y> - |y - c|^2 / 4 is smooth; its gradient at x is p0.
  const Vec2 p{0.6, 0.8}, c{0.2, 0.1};
  const auto u = [&](Vec2 y) { return dot(p, y) - 0.25 * norm2(y - c); };
  const Vec2 x{0.5, 0.5};
  const Vec2 p0 = p - 0.5 * (x - c);
  LaxOleinikOptions opt;
  for (double t : {0.1, 0.05, 0.02}) {
    const auto r = lax_oleinik_pos(eikonal(), u, t, x, lax_oleinik_box(x, t, 2.0), opt, 2.0);
    CHECK(distance(r.argmax, x + t * p0) < 0.1 * t);
  }
  const auto tiny = lax_oleinik_pos(eikonal(), u, 1e-6, x, lax_oleinik_box(x, 1e-6, 2.0), opt);
  CHECK(distance(tiny.argmax, x) < 1e-5);
}

TEST_CASE("positive Lax-Oleinik rejects t above t0 and undersized boxes") {
  LaxOleinikOptions opt;
  opt.t0 = 0.1;
  CHECK_THROWS_AS(lax_oleinik_pos(eikonal(), corner, 0.2, {1, 1}, Box2::around({1, 1}, 1.0), opt),
                  PreconditionError);
  CHECK_THROWS_AS(lax_oleinik_pos(eikonal(), corner, 0.1, {1, 1}, Box2::around({1, 1}, 0.1), opt, 2.0),
                  PreconditionError);
}

TEST_CASE("positive Lax-Oleinik reports ties") {
  // u = max of two cones around x has two symmetric maximizers.
  const auto u = [](Vec2 y) { return std::abs(y.x1 - 1.0); };
  LaxOleinikOptions opt;
  const auto r = lax_oleinik_pos(eikonal(), u, 0.1, {1, 1}, lax_oleinik_box({1, 1}, 0.1, 2.0), opt);
  CHECK_FALSE(r.unique);
  CHECK(r.candidates.size() >= 2);
}

TEST_CASE("concavity spot check of -A_t") {
  const double c = concavity_spot_check(eikonal(), 0.1, {0, 0}, 0.2);
  CHECK(c == doctest::Approx(-10.0).epsilon(1e-6));
  const double osc = concavity_spot_check(oscillator(1.0), 0.1, {0.3, 0.1}, 0.2, 16);
  CHECK(osc < 0.0);
}
