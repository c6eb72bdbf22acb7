#include "hjsing/solution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "hjsing/errors.hpp"
#include "hjsing/expression.hpp"
#include "hjsing/optimize.hpp"

namespace hjsing {

Branch branch_from_expression(const std::string& text) {
  const Expression e = Expression::parse(text, Expression::kPositionVars);
  const Expression d1 = e.derivative(Var::x1), d2 = e.derivative(Var::x2);
  const Expression d11 = d1.derivative(Var::x1), d12 = d1.derivative(Var::x2),
                   d22 = d2.derivative(Var::x2);
  auto at = [](Vec2 x) { return VarValues{x.x1, x.x2, 0.0, 0.0}; };
  Branch b;
  b.name = text;
  b.value = [=](Vec2 x) { return e.eval(at(x)); };
  b.gradient = [=](Vec2 x) { return Vec2{d1.eval(at(x)), d2.eval(at(x))}; };
  b.hessian = [=](Vec2 x) {
    const double off = d12.eval(at(x));
    return Mat2{d11.eval(at(x)), off, off, d22.eval(at(x))};
  };
  return b;
}

void SolutionRep::require_in_region(Vec2 x) const {
  if (!is_finite(x) || !region().contains(x, 1e-12)) {
    throw OutOfRegionError("point (" + std::to_string(x.x1) + ", " + std::to_string(x.x2) +
                           ") is outside the working region");
  }
}

// ---------------------------------------------------------------------------
// min_of_smooth

MinOfSmooth::MinOfSmooth(std::vector<Branch> branches, Box2 region, std::optional<double> c,
                         double active_tol)
    : branches_(std::move(branches)), region_(region), active_tol_(active_tol) {
  if (branches_.empty()) throw PreconditionError("min_of_smooth needs at least one branch");
  for (const Branch& b : branches_) {
    if (!b.value || !b.gradient) {
      throw PreconditionError("branch '" + b.name + "' lacks a value or gradient");
    }
  }
  double bound = 0.0;
  constexpr int n = 17;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Vec2 x{region_.lo.x1 + (region_.hi.x1 - region_.lo.x1) * i / (n - 1),
                   region_.lo.x2 + (region_.hi.x2 - region_.lo.x2) * j / (n - 1)};
      for (std::size_t k = 0; k < branches_.size(); ++k) {
        const Mat2 hess = branch_hessian(k, x);
        if (!std::isfinite(hess.a11 + hess.a12 + hess.a21 + hess.a22)) {
          throw PreconditionError("branch '" + branches_[k].name +
                                  "' has a non-finite Hessian on the region");
        }
        bound = std::max(bound, hess.operator_norm());
      }
    }
  }
  if (c) {
    if (*c + 1e-9 < bound) {
      throw PreconditionError("semiconcavity constant " + std::to_string(*c) +
                              " is below the sampled Hessian bound " + std::to_string(bound));
    }
    c_ = *c;
  } else {
    // Grid sampling can miss the peak between nodes.
    c_ = 1.1 * bound;
  }
}

Mat2 MinOfSmooth::branch_hessian(std::size_t i, Vec2 x) const {
  const Branch& b = branches_[i];
  if (b.hessian) return b.hessian(x);
  const double h = 1e-5;
  const Vec2 c1 = (b.gradient(x + Vec2{h, 0}) - b.gradient(x - Vec2{h, 0})) / (2 * h);
  const Vec2 c2 = (b.gradient(x + Vec2{0, h}) - b.gradient(x - Vec2{0, h})) / (2 * h);
  const double off = 0.5 * (c1.x2 + c2.x1);
  return {c1.x1, off, off, c2.x2};
}

std::vector<std::size_t> MinOfSmooth::active_branches(Vec2 x, double tol) const {
  std::vector<double> vals(branches_.size());
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    vals[i] = branches_[i].value(x);
    lo = std::min(lo, vals[i]);
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    if (vals[i] <= lo + tol) out.push_back(i);
  }
  return out;
}

double MinOfSmooth::value(Vec2 x) const {
  require_in_region(x);
  double lo = std::numeric_limits<double>::infinity();
  for (const Branch& b : branches_) lo = std::min(lo, b.value(x));
  return lo;
}

Superdiff2D MinOfSmooth::superdiff(Vec2 x) const {
  require_in_region(x);
  Superdiff2D s;
  s.active = active_branches(x, active_tol_);
  if (s.active.empty()) throw std::logic_error("no active branch");
  std::vector<Vec2> grads;
  for (std::size_t i : s.active) grads.push_back(branches_[i].gradient(x));
  s.set = ConvexSet2D::hull_of(grads);
  // Active gradients that survive as extreme points, in branch order.
  for (const Vec2& g : grads) {
    const auto& ext = s.set.extreme_points();
    const bool extreme = std::any_of(ext.begin(), ext.end(), [&](Vec2 e) {
      return distance(e, g) <= 1e-12 * std::max(1.0, norm(g));
    });
    const bool seen = std::any_of(s.reachable.begin(), s.reachable.end(), [&](Vec2 e) {
      return distance(e, g) <= 1e-12 * std::max(1.0, norm(g));
    });
    if (extreme && !seen) s.reachable.push_back(g);
  }
  s.sing_class = s.set.dimension();
  return s;
}

// ---------------------------------------------------------------------------
// lax_oleinik_value

LaxOleinikValue::LaxOleinikValue(Hamiltonian h, ScalarField u0, double t, Box2 region,
                                 double lambda, double c, unsigned seed,
                                 LaxOleinikOptions opt)
    : h_(std::move(h)), u0_(std::move(u0)), t_(t), region_(region), lambda_(lambda),
      c_(c), seed_(seed), opt_(opt) {
  if (!(t > 0.0)) throw PreconditionError("Lax-Oleinik solution needs t > 0");
  if (!(lambda > 0.0)) throw PreconditionError("Lax-Oleinik solution needs lambda > 0");
}

Box2 LaxOleinikValue::search_box(Vec2 x) const { return lax_oleinik_box(x, t_, lambda_); }

double LaxOleinikValue::value(Vec2 x) const {
  require_in_region(x);
  const std::pair<double, double> key{x.x1, x.x2};
  {
    const std::lock_guard<std::mutex> lock(mu_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  const double v = lax_oleinik_neg(h_, u0_, t_, x, search_box(x), opt_).value;
  const std::lock_guard<std::mutex> lock(mu_);
  cache_.emplace(key, v);
  return v;
}

Superdiff2D LaxOleinikValue::superdiff(Vec2 x) const {
  require_in_region(x);
  const Box2 box = search_box(x);
  const ActionEvaluator a(h_, t_, opt_.action_nodes);
  const auto f = [&](Vec2 y) {
    const Vec2 yc{std::clamp(y.x1, box.lo.x1, box.hi.x1), std::clamp(y.x2, box.lo.x2, box.hi.x2)};
    return u0_(yc) + a(yc, x);
  };
  std::vector<std::pair<double, Vec2>> minima;
  const LaxOleinikNeg global = lax_oleinik_neg(h_, u0_, t_, x, box, opt_);
  minima.emplace_back(global.value, global.argmin);
  std::mt19937_64 rng(seed_);
  std::uniform_real_distribution<double> u1(box.lo.x1, box.hi.x1), u2(box.lo.x2, box.hi.x2);
  for (int k = 0; k < kMultiStarts; ++k) {
    const Vec2 start{u1(rng), u2(rng)};
    const auto nm = nelder_mead_2d(f, start, box.diameter() / 20.0, 1e-10, 8);
    minima.emplace_back(nm.f, nm.x);
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& m : minima) best = std::min(best, m.first);

  std::vector<Vec2> grads;
  for (const auto& [fv, y] : minima) {
    if (fv > best + 1e-7) continue;
    Vec2 p;
    if (h_.position_independent()) {
      p = momentum_for_velocity(h_, x, (x - y) / t_);
    } else {
      const ActionResult r = fundamental_solution(h_, t_, y, x, 16);
      if (r.shooting.converged) {
        p = flow(h_, {y, r.shooting.p0}, t_, t_ / 1000).back().p;
      } else {
        const auto& n = r.minimizer.nodes;
        const double tau = t_ / static_cast<double>(n.size() - 1);
        p = momentum_for_velocity(h_, 0.5 * (n[n.size() - 2] + n.back()),
                                  (n.back() - n[n.size() - 2]) / tau);
      }
    }
    const bool dup = std::any_of(grads.begin(), grads.end(),
                                 [&](Vec2 g) { return distance(g, p) <= kClusterRadius; });
    if (!dup) grads.push_back(p);
  }
  Superdiff2D s;
  s.set = ConvexSet2D::hull_of(grads, kClusterRadius);
  s.reachable = s.set.extreme_points();
  s.sing_class = s.set.dimension();
  s.heuristic = true;
  return s;
}

// ---------------------------------------------------------------------------

double value(const SolutionRep& u, Vec2 x) { return u.value(x); }
Superdiff2D superdiff(const SolutionRep& u, Vec2 x) { return u.superdiff(x); }
bool is_singular(const SolutionRep& u, Vec2 x) { return u.superdiff(x).sing_class > 0; }
int sing_class(const SolutionRep& u, Vec2 x) { return u.superdiff(x).sing_class; }

bool is_singular(const SolutionRep& u, Vec2 x, double tol) {
  const auto* m = dynamic_cast<const MinOfSmooth*>(&u);
  if (!m) return is_singular(u, x);
  m->value(x);  // region check
  std::vector<Vec2> grads;
  for (std::size_t i : m->active_branches(x, tol)) grads.push_back(m->branches()[i].gradient(x));
  return ConvexSet2D::hull_of(grads).dimension() > 0;
}

EnergySelection energy_argmin(const Hamiltonian& h, const ConvexSet2D& set, Vec2 x) {
  EnergySelection e;
  const auto& pts = set.extreme_points();
  if (set.kind() == SetKind::point) {
    e.p_min = pts[0];
  } else if (h.quadratic_in_p()) {
    const auto q = h.quadratic(x);
    e.p_min = minimize_quadratic_on_convex(set, q.q, q.g);
  } else {
    double best = std::numeric_limits<double>::infinity();
    if (set.kind() == SetKind::polygon) {
      const Vec2 free = momentum_for_velocity(h, x, Vec2{});
      if (set.in_relative_interior(free, 0.0)) {
        best = h(x, free);
        e.p_min = free;
      }
    }
    for (const auto& [a, b] : set.edges()) {
      const auto along = [&](double s) { return h(x, a + s * (b - a)); };
      double s = golden_section(along, 0.0, 1.0, 1e-12);
      // Value comparisons stall near sqrt(eps); polish with Newton on the
      // directional derivative, which is monotone by convexity.
      const Vec2 d = b - a;
      for (int it = 0; it < 4; ++it) {
        const Vec2 q = a + s * d;
        const double slope = dot(h.grad_p(x, q), d);
        const double curv = dot(h.hess_p(x, q) * d, d);
        if (!(curv > 0.0)) break;
        s = std::clamp(s - slope / curv, 0.0, 1.0);
      }
      const Vec2 p = a + s * d;
      if (h(x, p) < best) {
        best = h(x, p);
        e.p_min = p;
      }
    }
  }
  e.value = h(x, e.p_min);
  e.interior = set.kind() == SetKind::point || set.in_relative_interior(e.p_min, kInteriorTol);
  return e;
}

EnergySelection energy_argmin(const Hamiltonian& h, const SolutionRep& u, Vec2 x) {
  return energy_argmin(h, u.superdiff(x).set, x);
}

CriticalityTest criticality(const Hamiltonian& h, const ConvexSet2D& set, Vec2 x,
                            int edge_samples) {
  std::vector<Vec2> image;
  for (const Vec2& p : set.extreme_points()) image.push_back(h.grad_p(x, p));
  for (const auto& [a, b] : set.edges()) {
    for (int k = 1; k < edge_samples; ++k) {
      image.push_back(h.grad_p(x, a + (static_cast<double>(k) / edge_samples) * (b - a)));
    }
  }
  if (set.kind() == SetKind::polygon) {
    const Vec2 c = set.centroid();
    for (const Vec2& p : set.extreme_points()) {
      for (int k = 1; k < 4; ++k) image.push_back(h.grad_p(x, c + (k / 4.0) * (p - c)));
    }
    image.push_back(h.grad_p(x, c));
  }
  const auto m = hull_contains_origin(ConvexSet2D::hull_of(image));
  return {m.inside, m.indeterminate, m.boundary_distance};
}

CriticalityTest criticality(const Hamiltonian& h, const SolutionRep& u, Vec2 x) {
  return criticality(h, u.superdiff(x).set, x);
}

bool is_critical(const Hamiltonian& h, const SolutionRep& u, Vec2 x) {
  return criticality(h, u, x).critical;
}

FlowWithAction backward_calibrated(const Hamiltonian& h, const SolutionRep& u, Vec2 x,
                                   Vec2 p_star, double r, double dt) {
  const Superdiff2D s = u.superdiff(x);
  const bool reachable = std::any_of(s.reachable.begin(), s.reachable.end(),
                                     [&](Vec2 g) { return distance(g, p_star) <= 1e-6; });
  if (!reachable) throw PreconditionError("p_star is not a reachable gradient of u at x");
  if (r < 0.0) throw PreconditionError("calibration horizon must be nonnegative");
  return flow_with_action(h, {x, p_star}, -r, dt);
}

DirectionalDerivative directional_superderivative(const SolutionRep& u, Vec2 x, Vec2 v) {
  DirectionalDerivative d;
  d.value = std::numeric_limits<double>::infinity();
  const Superdiff2D s = u.superdiff(x);
  for (const Vec2& p : s.set.extreme_points()) d.value = std::min(d.value, dot(p, v));
  constexpr double lambda = 1e-4;
  d.quotient = (u.value(x + lambda * v) - u.value(x)) / lambda;
  d.warning = std::abs(d.quotient - d.value) > 1e-3;
  return d;
}

ConvexSet2D exposed_face(const ConvexSet2D& set, Vec2 v) {
  const auto& pts = set.extreme_points();
  double lo = std::numeric_limits<double>::infinity();
  double scale = 0.0;
  for (const Vec2& p : pts) {
    lo = std::min(lo, dot(p, v));
    scale = std::max(scale, norm(p) * norm(v));
  }
  std::vector<Vec2> face;
  for (const Vec2& p : pts) {
    if (dot(p, v) <= lo + 1e-12 * std::max(1.0, scale)) face.push_back(p);
  }
  return ConvexSet2D::hull_of(face);
}

ConvexSet2D exposed_face(const SolutionRep& u, Vec2 x, Vec2 v) {
  return exposed_face(u.superdiff(x).set, v);
}

double max_branch_pde_residual(const Hamiltonian& h, const MinOfSmooth& u,
                               const std::vector<Vec2>& points) {
  double worst = 0.0;
  for (const Vec2& x : points) {
    for (std::size_t i : u.active_branches(x, u.active_tol())) {
      worst = std::max(worst, std::abs(h(x, u.branches()[i].gradient(x))));
    }
  }
  return worst;
}

}  // namespace hjsing
