#include <cmath>
#include <cstdio>
#include <string>

#include "doctest.h"
#include "hjsing/characteristics.hpp"
#include "hjsing/errors.hpp"

using namespace hjsing;

namespace {

const double kS2 = std::sqrt(2.0);

const Hamiltonian& eikonal() {
  static const Hamiltonian h = make_mechanical(Mat2::identity(), -0.5);
  return h;
}

const MinOfSmooth& corner() {
  static const MinOfSmooth u({branch_from_expression("x1"), branch_from_expression("x2")},
                             {{-1, -1}, {4, 4}});
  return u;
}

// H = 1/2 <diag(2, 1) p, p> - 1/2 with a flat branch and a conical one
// meeting at (1, 1/sqrt 2).
const Hamiltonian& aniso_h() {
  static const Hamiltonian h = make_quadratic_form(Mat2{2, 0, 0, 1}, {0, 0}, -0.5);
  return h;
}

const MinOfSmooth& aniso_u() {
  static const MinOfSmooth u = [] {
    const double c = 1.0 / kS2 - 2.0;
    char buf[160];
    std::snprintf(buf, sizeof buf, "sqrt(0.5*(x1-1)^2 + (x2-(%.17g))^2) + (%.17g)", c, c);
    return MinOfSmooth({branch_from_expression("x1/sqrt(2)"), branch_from_expression(buf)},
                       {{0, 0}, {3, 3}});
  }();
  return u;
}

const Vec2 kAnisoStart{1.0, 1.0 / kS2};

const MinOfSmooth& triple() {
  static const MinOfSmooth u({branch_from_expression("x1"), branch_from_expression("x2"),
                              branch_from_expression("1 + sqrt(2) - (x1 + x2)/sqrt(2)")},
                             {{-1, -1}, {4, 4}});
  return u;
}

// Test-side reference for the anisotropic corner: RK4 on the closed-form
// segment minimizer of 1/2 <Q p, p>.
Vec2 aniso_reference(double t) {
  const Mat2 q{2, 0, 0, 1};
  const auto f = [&](Vec2 x) {
    const Vec2 a = aniso_u().branches()[0].gradient(x);
    const Vec2 b = aniso_u().branches()[1].gradient(x);
    const Vec2 d = a - b;
    const double l = std::clamp(-dot(q * b, d) / dot(q * d, d), 0.0, 1.0);
    return q * (b + l * d);
  };
  const int n = 20000;
  const double h = t / n;
  Vec2 x = kAnisoStart;
  for (int i = 0; i < n; ++i) {
    const Vec2 k1 = f(x), k2 = f(x + 0.5 * h * k1), k3 = f(x + 0.5 * h * k2), k4 = f(x + h * k3);
    x += (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return x;
}

double dense_min_energy(const Hamiltonian& h, Vec2 x, Vec2 a, Vec2 b) {
  const int n = 200000;
  double best = 1e300;
  for (int i = 0; i <= n; ++i) best = std::min(best, h(x, a + (double(i) / n) * (b - a)));
  return best;
}

double dist_to_segment(Vec2 q, Vec2 a, Vec2 b) {
  const Vec2 d = b - a;
  const double s = std::clamp(dot(q - a, d) / norm2(d), 0.0, 1.0);
  return distance(q, a + s * d);
}

void check_arc_invariants(const SingularArc& arc) {
  REQUIRE(arc.size() >= 2);
  CHECK(arc.times.front() == 0.0);
  for (std::size_t k = 0; k + 1 < arc.size(); ++k) {
    CHECK(arc.times[k + 1] > arc.times[k]);
    CHECK(distance(arc.points[k + 1], arc.points[k]) <=
          arc.lip * (arc.times[k + 1] - arc.times[k]) * (1 + 1e-12) + 1e-15);
    CHECK(arc.omega[k + 1] >= arc.omega[k]);
  }
}

}  // namespace

TEST_CASE("strict characteristic of the corner") {
  const SingularArc arc = propagate_strict(eikonal(), corner(), {1, 1}, 1.0, 1e-3);
  REQUIRE(arc.size() == 1001);
  CHECK_FALSE(arc.truncated);
  double dev = 0.0;
  for (std::size_t k = 0; k < arc.size(); ++k) {
    const double t = arc.times[k];
    dev = std::max(dev, distance(arc.points[k], {1 + t / 2, 1 + t / 2}));
    CHECK(distance(arc.covectors[k], {0.5, 0.5}) < 1e-12);
    CHECK(eikonal()(arc.points[k], arc.covectors[k]) == doctest::Approx(-0.25).epsilon(1e-12));
    CHECK(arc.lambdas[k] == doctest::Approx(0.5));
    CHECK(arc.singular[k]);
  }
  CHECK(dev < 1e-6);
  CHECK(arc.at(0.5).x1 == doctest::Approx(1.25));
  check_arc_invariants(arc);
}

TEST_CASE("propagators reject smooth and critical starts") {
  CHECK_THROWS_AS(propagate_strict(eikonal(), corner(), {2, 1}, 1.0, 1e-3), PreconditionError);
  CHECK_THROWS_AS(propagate_generalized(eikonal(), corner(), {2, 1}, 1.0, 1e-3),
                  PreconditionError);
  try {
    propagate_strict(eikonal(), triple(), {1, 1}, 1.0, 1e-3);
    FAIL("critical start accepted");
  } catch (const PreconditionError& e) {
    CHECK(std::string(e.what()).find("0 \xE2\x88\x89 co H_p") != std::string::npos);
  }
  const LaxOleinikValue lo(eikonal(), [](Vec2 y) { return std::min(y.x1, y.x2); }, 0.1,
                           {{-1, -1}, {3, 3}}, 2.0, 1.0);
  CHECK_THROWS_AS(propagate_strict(eikonal(), lo, {1, 1}, 1.0, 1e-2), PreconditionError);
  CHECK_THROWS_AS(propagate_strict(eikonal(), corner(), {1, 1}, -1.0, 1e-3), PreconditionError);
}

TEST_CASE("energy condition and velocity membership along strict arcs") {
  const SingularArc arc = propagate_strict(aniso_h(), aniso_u(), kAnisoStart, 1.0, 1e-2);
  CHECK_FALSE(arc.truncated);
  for (std::size_t k = 0; k < arc.size(); k += 10) {
    const Vec2 x = arc.points[k];
    const Vec2 a = aniso_u().branches()[0].gradient(x), b = aniso_u().branches()[1].gradient(x);
    const double dense = dense_min_energy(aniso_h(), x, a, b);
    CHECK(std::abs(aniso_h()(x, arc.covectors[k]) - dense) < 1e-8);
    CHECK(dist_to_segment(arc.velocities[k], aniso_h().grad_p(x, a), aniso_h().grad_p(x, b)) <
          1e-9);
  }
}

TEST_CASE("strict arcs converge at first order to the reference curve") {
  std::vector<SingularArc> arcs;
  for (double dt : {4e-3, 2e-3, 1e-3}) {
    arcs.push_back(propagate_strict(aniso_h(), aniso_u(), kAnisoStart, 1.0, dt));
  }
  for (double t : {0.2, 0.6, 1.0}) {
    const Vec2 ref = aniso_reference(t);
    const double e4 = distance(arcs[0].at(t), ref), e2 = distance(arcs[1].at(t), ref),
                 e1 = distance(arcs[2].at(t), ref);
    CHECK(e1 < e2);
    CHECK(e2 < e4);
    CHECK(std::log2(e2 / e1) > 0.95);
    CHECK(e1 <= 0.1 * 1e-3);
    const Vec2 extrap = (8.0 * arcs[2].at(t) - 6.0 * arcs[1].at(t) + arcs[0].at(t)) / 3.0;
    CHECK(distance(extrap, ref) < 1e-6);
  }
  for (const auto& a : arcs) {
    CHECK(a.diagnostics.max_branch_gap <= 2e-10);
    check_arc_invariants(a);
  }
}

TEST_CASE("generalized characteristic") {
  SUBCASE("corner: lambda is one half") {
    const SingularArc arc = propagate_generalized(eikonal(), corner(), {1, 1}, 1.0, 1e-3);
    CHECK_FALSE(arc.truncated);
    for (std::size_t k = 0; k < arc.size(); ++k) {
      CHECK(arc.lambdas[k] == doctest::Approx(0.5).epsilon(1e-12));
      CHECK(distance(arc.points[k], {1 + arc.times[k] / 2, 1 + arc.times[k] / 2}) < 1e-6);
    }
    CHECK_FALSE(arc.diagnostics.initial_velocity_flag);
  }
  SUBCASE("anisotropic corner: hand-solved lambda and tangency") {
    const SingularArc arc = propagate_generalized(aniso_h(), aniso_u(), kAnisoStart, 1.0, 1e-3);
    CHECK_FALSE(arc.truncated);
    // a = (sqrt 2, 0), b = (0, 1), d = (-1/sqrt 2, 1): lambda = 1 / (1 + 1).
    CHECK(arc.lambdas[0] == doctest::Approx(0.5));
    CHECK(distance(arc.velocities[0], {1 / kS2, 0.5}) < 1e-12);
    CHECK(arc.diagnostics.initial_velocity_error < 1e-6);
    for (std::size_t k = 0; k < arc.size(); ++k) {
      const Vec2 x = arc.points[k];
      const Vec2 p1 = aniso_u().branches()[0].gradient(x), p2 = aniso_u().branches()[1].gradient(x);
      CHECK(std::abs(dot(arc.velocities[k], p2 - p1)) < 1e-6);
      CHECK(std::abs(aniso_u().branches()[0].value(x) - aniso_u().branches()[1].value(x)) <=
            2e-10);
    }
    // Quadratic H: the orthogonal selection is the energy minimizer.
    const SingularArc strict = propagate_strict(aniso_h(), aniso_u(), kAnisoStart, 1.0, 1e-3);
    REQUIRE(strict.size() == arc.size());
    for (std::size_t k = 0; k < arc.size(); ++k) {
      CHECK(distance(strict.points[k], arc.points[k]) < 1e-9);
    }
  }
  SUBCASE("non-quadratic Hamiltonian keeps the perpendicular selection") {
    const Hamiltonian h = make_custom_expression("0.5*(p1^2 + p2^2) + 0.1*p1^4 - 0.5");
    const SingularArc arc = propagate_generalized(h, corner(), {1, 1}, 0.5, 1e-3);
    for (std::size_t k = 0; k < arc.size(); ++k) {
      CHECK(std::abs(dot(arc.velocities[k], Vec2{-1, 1})) < 1e-6);
    }
  }
}

TEST_CASE("arcs stop at a triple junction") {
  const SingularArc gen = propagate_generalized(eikonal(), triple(), {0.5, 0.5}, 1.5, 1e-3);
  CHECK(gen.truncated);
  CHECK(gen.reason == "junction");
  CHECK(distance(gen.points.back(), {1, 1}) < 2e-3);
  const SingularArc strict = propagate_strict(eikonal(), triple(), {0.5, 0.5}, 1.5, 1e-3);
  CHECK(strict.truncated);
  CHECK((strict.reason == "junction" || strict.reason == "critical"));
  CHECK(distance(strict.points.back(), {1, 1}) < 2e-3);
}

TEST_CASE("softmin") {
  const MinOfSmooth& u = corner();
  const Vec2 x{1.2, 0.7};
  for (double eps : {1e-1, 1e-2}) {
    const double s = softmin(u, x, eps);
    CHECK(s <= value(u, x));
    CHECK(s >= value(u, x) - eps * std::log(2.0));
    const double h = 1e-6;
    const Vec2 fd{(softmin(u, x + Vec2{h, 0}, eps) - softmin(u, x - Vec2{h, 0}, eps)) / (2 * h),
                  (softmin(u, x + Vec2{0, h}, eps) - softmin(u, x - Vec2{0, h}, eps)) / (2 * h)};
    CHECK(distance(fd, softmin_gradient(u, x, eps)) < 1e-6);
  }
  CHECK(softmin(u, {1, 1}, 1e-3) == doctest::Approx(1 - 1e-3 * std::log(2.0)));
  CHECK_THROWS_AS(softmin(u, x, 0.0), PreconditionError);
}

TEST_CASE("mollified construction") {
  SUBCASE("corner converges to the diagonal") {
    const SingularArc arc =
        propagate_strict_mollified(eikonal(), corner(), {1, 1}, 1.0, 1e-3, {1e-2, 1e-3, 1e-4});
    CHECK(arc.diagnostics.converged);
    CHECK(arc.kind == ArcKind::mollified);
    for (std::size_t k = 0; k < arc.size(); ++k) {
      CHECK(distance(arc.points[k], {1 + arc.times[k] / 2, 1 + arc.times[k] / 2}) < 1e-4);
    }
  }
  SUBCASE("anisotropic corner agrees with the reference curve") {
    const SingularArc arc = propagate_strict_mollified(aniso_h(), aniso_u(), kAnisoStart, 1.0,
                                                       1e-3, {1e-2, 1e-3, 1e-4});
    CHECK(arc.diagnostics.converged);
    CHECK(distance(arc.at(1.0), aniso_reference(1.0)) < 1e-6);
  }
  SUBCASE("a single smooth branch gives the classical characteristic") {
    const MinOfSmooth smooth({branch_from_expression("0.6*x1 + 0.8*x2")}, {{-2, -2}, {3, 3}});
    const SingularArc arc =
        propagate_strict_mollified(eikonal(), smooth, {0, 0}, 1.0, 1e-2, {1e-2, 1e-3});
    const auto f = flow(eikonal(), {{0, 0}, {0.6, 0.8}}, 1.0, 1e-2);
    REQUIRE(f.size() == arc.size());
    for (std::size_t k = 0; k < f.size(); ++k) CHECK(distance(f[k].x, arc.points[k]) < 1e-12);
    CHECK(arc.diagnostics.converged);
  }
  SUBCASE("a large temperature is not accepted as converged") {
    CHECK_FALSE(propagate_strict_mollified(eikonal(), corner(), {1, 1}, 1.0, 1e-2, {0.5})
                    .diagnostics.converged);
    CHECK_FALSE(propagate_strict_mollified(eikonal(), corner(), {1, 1}, 1.0, 1e-2, {1.0, 0.5})
                    .diagnostics.converged);
  }
  CHECK_THROWS_AS(propagate_strict_mollified(eikonal(), corner(), {1, 1}, 1.0, 1e-2, {}),
                  PreconditionError);
}

TEST_CASE("intrinsic characteristic") {
  IntrinsicOptions opt;
  opt.lax_oleinik.t0 = 0.25;
  const std::vector<double> grid{0.01, 0.02, 0.05, 0.1, 0.2};
  const SingularArc arc = propagate_intrinsic(eikonal(), corner(), {1, 1}, grid, opt);
  REQUIRE(arc.size() == grid.size() + 1);
  CHECK(arc.points[0] == Vec2{1, 1});
  CHECK_FALSE(arc.has_covectors());
  // Brute-force maximization of min(y1, y2) - |y - x|^2 / (2t) - t/2.
  const double g = 1e-3;
  for (std::size_t k = 1; k < arc.size(); ++k) {
    const double t = arc.times[k];
    Vec2 best;
    double fbest = -1e300;
    for (double y1 = 1 - 3 * t; y1 <= 1 + 3 * t; y1 += g) {
      for (double y2 = 1 - 3 * t; y2 <= 1 + 3 * t; y2 += g) {
        const Vec2 y{y1, y2};
        const double f = std::min(y1, y2) - norm2(y - Vec2{1, 1}) / (2 * t) - t / 2;
        if (f > fbest) {
          fbest = f;
          best = y;
        }
      }
    }
    CHECK(distance(arc.points[k], best) <= 2 * g);
    CHECK(distance(arc.points[k], {1 + t / 2, 1 + t / 2}) < 1e-5);
    CHECK(arc.singular[k]);
  }
  CHECK(arc.diagnostics.initial_velocity_error < 0.02);
  CHECK(arc.diagnostics.nonunique_samples == 0);
  CHECK_THROWS_AS(propagate_intrinsic(eikonal(), corner(), {1, 1}, {0.3}, opt),
                  PreconditionError);
  CHECK_THROWS_AS(propagate_intrinsic(eikonal(), corner(), {1, 1}, {0.1, 0.05}, opt),
                  PreconditionError);
}

namespace {

SingularArc scripted(std::function<Vec2(double)> x, int n, double T) {
  SingularArc a;
  for (int k = 0; k <= n; ++k) {
    const double t = T * k / n;
    a.times.push_back(t);
    a.points.push_back(x(t));
  }
  for (int k = 0; k <= n; ++k) {
    const int j = std::min(k, n - 1);
    a.velocities.push_back((a.points[j + 1] - a.points[j]) / (a.times[j + 1] - a.times[j]));
  }
  a.singular.assign(a.size(), true);
  a.lambdas.assign(a.size(), std::nan(""));
  return a;
}

}  // namespace

TEST_CASE("Lip0 validation") {
  SUBCASE("constant velocity") {
    const auto arc = scripted([](double t) { return Vec2{t, 2 * t}; }, 100, 1.0);
    const Lip0Report r = validate_lip0(arc);
    CHECK(r.pass);
    CHECK(distance(r.v0, {1, 2}) < 1e-12);
    for (double w : r.omega) CHECK(w < 1e-12);
    CHECK(r.b.informative);
  }
  SUBCASE("velocity jump at one half") {
    const auto arc = scripted(
        [](double t) { return t <= 0.5 ? Vec2{t, 0} : Vec2{0.5, t - 0.5}; }, 100, 1.0);
    const Lip0Report r = validate_lip0(arc);
    CHECK(r.omega[50] < 1e-12);
    CHECK(r.omega[51] == doctest::Approx(std::sqrt(2.0)));
    CHECK(r.d.pass);
    CHECK(r.pass);
  }
  SUBCASE("velocity not settling at zero fails D") {
    const auto arc = scripted([](double t) { return Vec2{t, std::sqrt(t)}; }, 400, 1.0);
    CHECK_FALSE(validate_lip0(arc).d.pass);
  }
  SUBCASE("strict arc with its Hamiltonian") {
    const SingularArc arc = propagate_strict(eikonal(), corner(), {1, 1}, 1.0, 1e-2);
    const Lip0Report r = validate_lip0(arc, &eikonal(), &corner());
    CHECK(r.pass);
    CHECK(r.b.margin > 0);
    CHECK(r.c.margin > 0.02 - 1e-9);
    auto bent = arc;
    for (std::size_t k = 0; k < bent.size(); ++k) bent.points[k] += bent.times[k] * Vec2{0.1, 0};
    CHECK_FALSE(validate_lip0(bent, &eikonal(), &corner()).c.pass);
  }
  SUBCASE("intrinsic arcs report D as informative") {
    IntrinsicOptions opt;
    opt.lax_oleinik.t0 = 0.25;
    std::vector<double> grid;
    for (int k = 1; k <= 10; ++k) grid.push_back(0.02 * k);
    const SingularArc arc = propagate_intrinsic(eikonal(), corner(), {1, 1}, grid, opt);
    const Lip0Report r = validate_lip0(arc, &eikonal(), &corner());
    CHECK(r.d.informative);
    CHECK(r.a.pass);
    CHECK(r.b.pass);
    CHECK(r.c.pass);
  }
  SUBCASE("too few samples") {
    CHECK_THROWS_AS(validate_lip0(scripted([](double t) { return Vec2{t, 0}; }, 5, 1.0)),
                    PreconditionError);
  }
}

TEST_CASE("appendix gap") {
  SUBCASE("the recorded selection closes the gap") {
    const SingularArc arc = propagate_strict(aniso_h(), aniso_u(), kAnisoStart, 1.0, 1e-2);
    for (std::size_t k = 0; k < arc.size(); k += 10) {
      const AppendixGap g =
          appendix_gap(aniso_h(), aniso_u(), arc.points[k], arc.velocities[k], arc.covectors[k]);
      CHECK(g.mu <= 1e-8);
      CHECK(g.p_bar_in_face);
    }
  }
  SUBCASE("a wrong selection leaves a positive gap") {
    // v = (1, 0), p = (1, 0): alpha + beta = a + 2 (1 - a)^2 on p = (a, 1 - a).
    const AppendixGap g = appendix_gap(eikonal(), corner(), {1, 1}, {1, 0}, {1, 0});
    CHECK(g.mu == doctest::Approx(0.875).epsilon(1e-10));
    CHECK(distance(g.argmin, {0.75, 0.25}) < 1e-6);
    CHECK(g.directional == 0.0);
    CHECK_FALSE(g.p_bar_in_face);
  }
}
