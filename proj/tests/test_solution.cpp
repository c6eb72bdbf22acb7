#include <cmath>
#include <random>

#include "doctest.h"
#include "hjsing/errors.hpp"
#include "hjsing/solution.hpp"

using namespace hjsing;

namespace {

const Box2 kRegion{{-3, -3}, {4, 4}};

MinOfSmooth corner() {
  return MinOfSmooth({branch_from_expression("x1"), branch_from_expression("x2")}, kRegion);
}

MinOfSmooth triple() {
  return MinOfSmooth({branch_from_expression("x1"), branch_from_expression("x2"),
                      branch_from_expression("3 - x1 - x2")},
                     kRegion);
}

const Hamiltonian& eikonal() {
  static const Hamiltonian h = make_mechanical(Mat2::identity(), -0.5);
  return h;
}

}  // namespace

TEST_CASE("values") {
  const auto u = corner();
  CHECK(value(u, {2, 1}) == 1.0);
  CHECK(value(u, {1, 1}) == 1.0);
  const MinOfSmooth cone({branch_from_expression("x1"), branch_from_expression("-x1")}, kRegion);
  CHECK(value(cone, {0, 0.3}) == 0.0);
  CHECK_THROWS_AS(value(u, {10, 0}), OutOfRegionError);
}

TEST_CASE("superdifferential structure") {
  const auto u = corner();
  auto s = superdiff(u, {1, 1});
  REQUIRE(s.set.kind() == SetKind::segment);
  CHECK(s.sing_class == 1);
  REQUIRE(s.reachable.size() == 2);
  CHECK(s.reachable[0] == Vec2{1, 0});
  CHECK(s.reachable[1] == Vec2{0, 1});
  CHECK(is_singular(u, {1, 1}));

  s = superdiff(u, {2, 1});
  CHECK(s.set.kind() == SetKind::point);
  CHECK(s.set.extreme_points()[0] == Vec2{0, 1});
  CHECK_FALSE(is_singular(u, {2, 1}));

  // Triple point: x1 = x2 = 3 - x1 - x2 solves to (1, 1).
  const auto w = triple();
  s = superdiff(w, {1, 1});
  CHECK(s.sing_class == 2);
  CHECK(s.set.kind() == SetKind::polygon);
  CHECK(s.reachable.size() == 3);
  CHECK(sing_class(w, {1, 1}) == 2);
}

TEST_CASE("reachable gradients generate the superdifferential and lie on its boundary") {
  const auto w = triple();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(0.5, 1.5);
  for (int k = 0; k < 50; ++k) {
    const double a = U(rng);
    for (Vec2 x : {Vec2{a, a}, Vec2{a, 1.0 + (1.0 - a) * 0.0}, Vec2{1, 1}}) {
      const auto s = superdiff(w, x);
      for (const Vec2& p : s.reachable) CHECK(s.set.relative_boundary_distance(p) < 1e-12);
      const auto again = ConvexSet2D::hull_of(s.reachable);
      CHECK(again.size() == s.set.size());
    }
  }
}

TEST_CASE("energy selection") {
  const auto u = corner();
  auto e = energy_argmin(eikonal(), u, {1, 1});
  CHECK(distance(e.p_min, {0.5, 0.5}) < 1e-15);
  CHECK(e.value == doctest::Approx(-0.25));
  CHECK(e.interior);

  e = energy_argmin(eikonal(), u, {2, 1});
  CHECK(e.p_min == Vec2{0, 1});
  CHECK(e.value == doctest::Approx(0.0));

  // Oracle: minimize 2 p1^2 + p2^2 along the segment by a dense scan.
  const auto h = make_mechanical(Mat2::diag(2, 1), -0.5);
  const Vec2 a{1 / std::sqrt(2.0), 0}, b{0, 1};
  e = energy_argmin(h, ConvexSet2D::segment(a, b), {0, 0});
  double best = 1e300, best_s = 0;
  for (int k = 0; k <= 100000; ++k) {
    const double s = k / 100000.0;
    const Vec2 p = a + s * (b - a);
    const double f = 2 * p.x1 * p.x1 + p.x2 * p.x2;
    if (f < best) {
      best = f;
      best_s = s;
    }
  }
  CHECK(distance(e.p_min, a + best_s * (b - a)) < 2e-5);
  CHECK(e.value == doctest::Approx(0.5 * best - 0.5).epsilon(1e-9));
}

TEST_CASE("energy selection for a non-quadratic Hamiltonian matches dense sampling") {
  const auto h = make_custom_expression("0.5*(p1^2 + p2^2) + 0.2*p1^4 + 0.3*p1 - 0.5");
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-1.5, 1.5);
  for (int k = 0; k < 30; ++k) {
    std::vector<Vec2> pts{{U(rng), U(rng)}, {U(rng), U(rng)}, {U(rng), U(rng)}};
    const auto set = ConvexSet2D::hull_of(pts);
    const auto e = energy_argmin(h, set, {0, 0});
    double dense = 1e300;
    const int n = 300;
    for (int i = 0; i <= n; ++i) {
      for (int j = 0; i + j <= n; ++j) {
        const double l1 = double(i) / n, l2 = double(j) / n;
        dense = std::min(dense, h({0, 0}, l1 * pts[0] + l2 * pts[1] + (1 - l1 - l2) * pts[2]));
      }
    }
    CHECK(e.value <= dense + 1e-12);
    CHECK(e.value >= dense - 1e-3);
  }
}

TEST_CASE("an interior energy minimum is orthogonal to the segment") {
  const auto h = make_quadratic_form({2, 0.4, 0.4, 1}, {0.1, -0.2}, -0.5);
  const auto hc = make_custom_expression("0.5*(2*p1^2 + p2^2) + 0.1*p2^4 + 0.2*p1 - 0.5");
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> U(-2, 2);
  int interior = 0;
  for (const Hamiltonian* hp : {&h, &hc}) {
    for (int k = 0; k < 200; ++k) {
      const Vec2 p1{U(rng), U(rng)}, p2{U(rng), U(rng)};
      const auto e = energy_argmin(*hp, ConvexSet2D::segment(p1, p2), {0, 0});
      if (!e.interior) continue;
      ++interior;
      CHECK(std::abs(dot(hp->grad_p({0, 0}, e.p_min), p2 - p1)) < 1e-7);
    }
  }
  CHECK(interior > 50);
}

TEST_CASE("criticality") {
  const auto& h = eikonal();
  CHECK_FALSE(criticality(h, ConvexSet2D::segment({1, 0}, {0, 1}), {0, 0}).critical);
  CHECK(criticality(h, ConvexSet2D::segment({-1, 0}, {1, 0}), {0, 0}).critical);
  // u = -|x1| solves |p|^2/2 - 1/2 = 0 and has 0 inside D+u on x1 = 0.
  MechanicalSpec spec;
  spec.a = [](Vec2) { return Mat2::identity(); };
  spec.v = [](Vec2) { return -0.5; };
  spec.region = kRegion;
  const auto mech = make_mechanical(spec);
  const MinOfSmooth ridge({branch_from_expression("x1"), branch_from_expression("-x1")}, kRegion);
  CHECK(is_critical(mech, ridge, {0, 0.7}));
  CHECK_FALSE(is_critical(mech, corner(), {1, 1}));
  CHECK(is_critical(mech, triple(), {1, 1}));
}

TEST_CASE("backward calibrated curves") {
  const auto u = corner();
  const double r = 0.6;
  auto c = backward_calibrated(eikonal(), u, {1, 1}, {0, 1}, r, 1e-3);
  CHECK(distance(c.states.back().x, {1, 1 - r}) < 1e-12);
  CHECK(value(u, {1, 1}) - value(u, c.states.back().x) == doctest::Approx(c.action.back()));
  CHECK(c.action.back() == doctest::Approx(r));
  c = backward_calibrated(eikonal(), u, {1, 1}, {1, 0}, r, 1e-3);
  CHECK(distance(c.states.back().x, {1 - r, 1}) < 1e-12);
  CHECK_THROWS_AS(backward_calibrated(eikonal(), u, {1, 1}, {0.5, 0.5}, r, 1e-3), PreconditionError);
}

TEST_CASE("directional superderivative") {
  const auto u = corner();
  auto d = directional_superderivative(u, {1, 1}, {1, 1});
  CHECK(d.value == 1.0);
  CHECK_FALSE(d.warning);
  CHECK(directional_superderivative(u, {1, 1}, {1, 0}).value == 0.0);
  d = directional_superderivative(u, {1, 1}, {1, -1});
  CHECK(d.value == -1.0);
  CHECK_FALSE(d.warning);
}

TEST_CASE("exposed faces") {
  const auto seg = ConvexSet2D::segment({1, 0}, {0, 1});
  CHECK(exposed_face(seg, {1, 1}).kind() == SetKind::segment);
  auto f = exposed_face(seg, {1, 0});
  CHECK(f.kind() == SetKind::point);
  CHECK(f.extreme_points()[0] == Vec2{0, 1});
  f = exposed_face(corner(), {1, 1}, {0, 1});
  CHECK(f.extreme_points()[0] == Vec2{1, 0});
}

TEST_CASE("semiconcavity inequality at extreme points") {
  const MinOfSmooth u({branch_from_expression("x1 + 0.25*sin(x1) + x2"),
                       branch_from_expression("x1 + 0.25*sin(x1) - x2"),
                       branch_from_expression("1 - 0.3*(x1^2 + x2^2)")},
                      {{-2, -2}, {2, 2}});
  const double c = u.semiconcavity_constant();
  CHECK(c >= 0.25);
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> U(-1.5, 1.5);
  for (int k = 0; k < 10; ++k) {
    const Vec2 x = k < 3 ? Vec2{U(rng), 0.0} : Vec2{U(rng), U(rng)};
    const auto sd = superdiff(u, x);
    for (const Vec2& p : sd.set.extreme_points()) {
      for (int j = 0; j < 500; ++j) {
        const Vec2 y = x + 0.3 * Vec2{U(rng), U(rng)};
        if (!u.region().contains(y)) continue;
        CHECK(value(u, y) <= value(u, x) + dot(p, y - x) + 0.5 * c * norm2(y - x) + 1e-12);
      }
    }
  }
}

TEST_CASE("supplied semiconcavity constant must dominate the Hessians") {
  CHECK_THROWS_AS(MinOfSmooth({branch_from_expression("x1^2")}, {{-1, -1}, {1, 1}}, 1.0),
                  PreconditionError);
  CHECK_NOTHROW(MinOfSmooth({branch_from_expression("x1^2")}, {{-1, -1}, {1, 1}}, 2.0));
}

TEST_CASE("the superdifferential is upper semicontinuous") {
  const auto w = triple();
  const auto limit = superdiff(w, {1, 1}).set;
  double previous = 1e300;
  for (int j = 1; j <= 6; ++j) {
    const double e = std::pow(10.0, -j);
    // Approach the triple point along a sequence of generic points.
    const Vec2 xj{1 + e, 1 + 0.5 * e};
    double excess = 0.0;
    const auto sd = superdiff(w, xj);
    for (const Vec2& p : sd.set.extreme_points()) {
      excess = std::max(excess, limit.distance_to(p));
    }
    CHECK(excess <= previous);
    previous = excess;
  }
  CHECK(previous < 1e-12);
}

TEST_CASE("branches solve the equation where active") {
  const auto u = corner();
  std::vector<Vec2> pts;
  for (int i = 0; i < 20; ++i) pts.push_back({-2 + 0.3 * i, 3 - 0.25 * i});
  CHECK(max_branch_pde_residual(eikonal(), u, pts) < 1e-8);
}

TEST_CASE("Lax-Oleinik representation of the corner solution") {
  const auto u0 = [](Vec2 y) { return std::min(y.x1, y.x2); };
  const LaxOleinikValue u(eikonal(), u0, 0.5, kRegion, 2.0, 0.0, 5);
  CHECK(value(u, {2, 1}) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(value(u, {2, 1}) == value(u, {2, 1}));
  auto s = superdiff(u, {1, 1});
  CHECK(s.heuristic);
  REQUIRE(s.set.kind() == SetKind::segment);
  const auto& e = s.set.extreme_points();
  const bool ordered = distance(e[0], {1, 0}) < 1e-4 && distance(e[1], {0, 1}) < 1e-4;
  const bool swapped = distance(e[1], {1, 0}) < 1e-4 && distance(e[0], {0, 1}) < 1e-4;
  CHECK((ordered || swapped));
  s = superdiff(u, {2, 1});
  CHECK(s.set.kind() == SetKind::point);
  CHECK(distance(s.set.extreme_points()[0], {0, 1}) < 1e-4);
}
