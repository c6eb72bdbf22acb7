#include <cmath>
#include <random>

#include "doctest.h"
#include "hjsing/errors.hpp"
#include "hjsing/hamiltonian.hpp"

using namespace hjsing;

TEST_CASE("mechanical examples") {
  const auto h = make_mechanical(Mat2::identity(), -0.5);
  CHECK(h({3, 4}, {1, 0}) == doctest::Approx(0.0));
  const auto h0 = make_mechanical(Mat2::identity(), 0.0);
  CHECK(h0.grad_p({1, 2}, {0.3, -0.7}) == Vec2{0.3, -0.7});
  const auto ha = make_mechanical(Mat2::diag(2, 1), -0.5);
  CHECK(ha({0, 0}, {0, 1}) == doctest::Approx(0.0));
  CHECK(ha.grad_p({0, 0}, {0, 1}) == Vec2{0, 1});
  CHECK(ha.convexity_modulus() == doctest::Approx(1.0));
}

TEST_CASE("mechanical rejects non-SPD") {
  CHECK_THROWS_AS(make_mechanical(Mat2{1, 0, 0, -1}, 0.0), PreconditionError);
  MechanicalSpec spec;
  spec.a = [](Vec2 x) { return Mat2::diag(1.0, x.x1); };
  spec.v = [](Vec2) { return 0.0; };
  spec.region = {{-1, -1}, {1, 1}};
  CHECK_THROWS_AS(make_mechanical(spec), PreconditionError);
}

TEST_CASE("mechanical grad_x, exact and by finite differences") {
  MechanicalSpec spec;
  spec.a = [](Vec2 x) { return Mat2::diag(2.0 + std::sin(x.x1), 1.0 + 0.5 * x.x2 * x.x2); };
  spec.v = [](Vec2 x) { return std::cos(x.x1) * x.x2; };
  spec.region = {{-1, -1}, {1, 1}};
  const auto h = make_mechanical(spec);
  const Vec2 x{0.3, -0.4}, p{0.8, -1.1};
  const Vec2 expect{0.5 * std::cos(x.x1) * p.x1 * p.x1 - std::sin(x.x1) * x.x2,
                    0.5 * x.x2 * p.x2 * p.x2 + std::cos(x.x1)};
  CHECK(distance(h.grad_x(x, p), expect) < 1e-8);
  CHECK(h.derivative_discrepancy(x, p) < 1e-8);
}

TEST_CASE("Legendre transform examples") {
  const auto h = make_mechanical(Mat2::identity(), -0.5);
  const Lagrangian l = legendre(h);
  CHECK(l({0, 0}, {1, 0}) == doctest::Approx(1.0));
  CHECK(l({0, 0}, {0, 0}) == doctest::Approx(0.5));
  const Mat2 a{2, 0.5, 0.5, 1};
  const auto hq = make_quadratic_form(a, {}, 0.0);
  const Vec2 v{0.3, -0.8};
  CHECK(legendre(hq)({0, 0}, v) == doctest::Approx(0.5 * dot(a.inverse() * v, v)));
}

TEST_CASE("Fenchel duality on sampled triples, all families") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-1.5, 1.5);
  const std::vector<Hamiltonian> hs{
      make_quadratic_form({2, 0.3, 0.3, 1}, {0.3, 0}, -0.8),
      make_mechanical(Mat2::diag(2, 1), -0.5),
      make_custom_expression("0.5*(p1^2+p2^2) + 0.1*p1^4 + 0.05*sin(x1)*p2^2 - 0.5"),
  };
  for (const auto& h : hs) {
    const Lagrangian l = legendre(h);
    for (int k = 0; k < 100; ++k) {
      const Vec2 x{U(rng), U(rng)}, p{U(rng), U(rng)}, v{U(rng), U(rng)};
      CHECK(h(x, p) + l(x, v) >= dot(p, v) - 1e-8);
      const Vec2 vp = h.grad_p(x, p);
      CHECK(std::abs(h(x, p) + l(x, vp) - dot(p, vp)) < 1e-8);
      CHECK(distance(l.grad_v(x, vp), p) < 1e-8);
    }
  }
}

TEST_CASE("custom Hamiltonian with finite-difference derivatives") {
  CustomSpec spec;
  spec.value = [](Vec2 x, Vec2 p) {
    return 0.5 * norm2(p) + 0.1 * std::pow(p.x1, 4) + 0.2 * std::sin(x.x1) * x.x2;
  };
  spec.region = {{-1, -1}, {1, 1}};
  spec.momentum_bound = 2.0;
  const auto h = make_custom(spec);
  const Vec2 x{0.4, 0.6}, p{0.7, -0.2};
  const Vec2 gp{p.x1 + 0.4 * std::pow(p.x1, 3), p.x2};
  const Vec2 gx{0.2 * std::cos(x.x1) * x.x2, 0.2 * std::sin(x.x1)};
  CHECK(distance(h.grad_p(x, p), gp) < 1e-8);
  CHECK(distance(h.grad_x(x, p), gx) < 1e-8);
  CHECK(h.derivative_discrepancy(x, p) < 1e-7);
  CHECK(h.convexity_modulus() > 0.99);
}

TEST_CASE("custom Hamiltonian must be convex in p") {
  CHECK_THROWS_AS(make_custom_expression("p1^2 - p2^2"), PreconditionError);
}

TEST_CASE("flow examples") {
  const auto free = make_mechanical(Mat2::identity(), 0.0);
  auto f = flow(free, {{0, 0}, {1, 0}}, 1.0, 0.01);
  CHECK(distance(f.back().x, {1, 0}) < 1e-12);
  CHECK(distance(f.back().p, {1, 0}) < 1e-12);

  CHECK(flow(free, {{0, 0}, {1, 0}}, 0.0, 0.01).size() == 1);

  const auto eik = make_mechanical(Mat2::identity(), -0.5);
  f = flow(eik, {{2, 1}, {0, 1}}, -1.0, 0.01);
  CHECK(distance(f.back().x, {2, 0}) < 1e-12);
  CHECK(distance(f.back().p, {0, 1}) < 1e-12);

  CHECK_THROWS_AS(flow(eik, {{0, 0}, {0, 1}}, 1.0, 0.0), PreconditionError);
  CHECK_THROWS_AS(flow(eik, {{0, 0}, {0, 1}}, 1e8, 1.0), PreconditionError);
}

TEST_CASE("flow blow-up reports an error") {
  const auto h = make_custom_expression("0.5*(p1^2+p2^2) - exp(3*x1)", {{-100, -100}, {100, 100}});
  CHECK_THROWS_AS(flow(h, {{0, 0}, {1, 0}}, 50.0, 0.01), NumericalError);
}

TEST_CASE("energy drift converges at fourth order") {
  MechanicalSpec spec;
  spec.a = [](Vec2) { return Mat2::identity(); };
  spec.v = [](Vec2 x) { return 0.5 * (x.x1 * x.x1 + 4.0 * x.x2 * x.x2) + 0.3 * x.x1 * x.x1 * x.x1; };
  spec.region = {{-2, -2}, {2, 2}};
  const auto h = make_mechanical(spec);
  const PhasePoint s{{0.5, 0.2}, {0.1, 0.4}};
  auto drift = [&](double dt) {
    const auto f = flow(h, s, 2.0, dt);
    double worst = 0.0;
    for (const auto& q : f) worst = std::max(worst, std::abs(h(q.x, q.p) - h(s.x, s.p)));
    return worst;
  };
  const double d1 = drift(0.1), d2 = drift(0.05);
  CHECK(std::log2(d1 / d2) > 3.5);
}

TEST_CASE("flow_with_action matches the eikonal ray action") {
  const auto eik = make_mechanical(Mat2::identity(), -0.5);
  const auto f = flow_with_action(eik, {{1, 1}, {0, 1}}, -0.5, 0.01);
  // L = |v|^2/2 + 1/2 = 1 along a unit-speed ray.
  CHECK(f.action.back() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(f.times.back() == doctest::Approx(-0.5));
}
