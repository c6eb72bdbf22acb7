#include "hjsing/action.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "hjsing/errors.hpp"
#include "hjsing/optimize.hpp"

namespace hjsing {

namespace {

struct SegmentTerms {
  double l = 0.0;
  Vec2 lv;  // L_v at the midpoint
  Vec2 lx;  // L_x at the midpoint
};

SegmentTerms segment_terms(const Lagrangian& l, Vec2 a, Vec2 b, double tau) {
  const Vec2 m = 0.5 * (a + b);
  const Vec2 v = (b - a) / tau;
  const Hamiltonian& h = l.hamiltonian();
  const Vec2 p = momentum_for_velocity(h, m, v);
  SegmentTerms s;
  s.l = dot(p, v) - h(m, p);
  s.lv = p;
  s.lx = h.position_independent() ? Vec2{} : -h.grad_x(m, p);
  return s;
}

// Discrete action and its gradient over the interior nodes, which are
// packed in z as (x1, x2) pairs.
double action_and_gradient(const Lagrangian& l, Vec2 x, Vec2 y, double tau,
                           const std::vector<double>& z, std::vector<double>& grad) {
  const std::size_t interior = z.size() / 2;
  auto node = [&](std::size_t k) -> Vec2 {
    if (k == 0) return x;
    if (k == interior + 1) return y;
    return {z[2 * (k - 1)], z[2 * (k - 1) + 1]};
  };
  double total = 0.0;
  std::fill(grad.begin(), grad.end(), 0.0);
  for (std::size_t k = 0; k <= interior; ++k) {
    const SegmentTerms s = segment_terms(l, node(k), node(k + 1), tau);
    total += tau * s.l;
    // d/dq_k and d/dq_{k+1} of tau * L(m_k, v_k).
    const Vec2 left = tau * (0.5 * s.lx) - s.lv;
    const Vec2 right = tau * (0.5 * s.lx) + s.lv;
    if (k >= 1) {
      grad[2 * (k - 1)] += left.x1;
      grad[2 * (k - 1) + 1] += left.x2;
    }
    if (k + 1 <= interior) {
      grad[2 * k] += right.x1;
      grad[2 * k + 1] += right.x2;
    }
  }
  return total;
}

std::vector<double> straight_line_interior(Vec2 x, Vec2 y, int n) {
  std::vector<double> z;
  z.reserve(static_cast<std::size_t>(2 * (n - 1)));
  for (int k = 1; k < n; ++k) {
    const Vec2 q = x + (static_cast<double>(k) / n) * (y - x);
    z.push_back(q.x1);
    z.push_back(q.x2);
  }
  return z;
}

std::vector<Vec2> unpack(Vec2 x, Vec2 y, const std::vector<double>& z) {
  std::vector<Vec2> nodes{x};
  for (std::size_t k = 0; k + 1 < z.size(); k += 2) nodes.push_back({z[k], z[k + 1]});
  nodes.push_back(y);
  return nodes;
}

constexpr int kShootingSteps = 1000;

Vec2 shoot(const Hamiltonian& h, Vec2 x, Vec2 p0, double t) {
  return flow(h, {x, p0}, t, t / kShootingSteps).back().x;
}

ShootingInfo shooting_refine(const Hamiltonian& h, double t, Vec2 x, Vec2 y, Vec2 p0) {
  ShootingInfo info;
  info.attempted = true;
  info.p0 = p0;
  try {
    Vec2 f = shoot(h, x, p0, t) - y;
    info.residual = norm(f);
    for (info.iterations = 0; info.iterations < 30 && info.residual >= 1e-3 * kShootingTol;
         ++info.iterations) {
      const double e = 1e-7 * std::max(1.0, norm(info.p0));
      const Vec2 c1 = (shoot(h, x, info.p0 + Vec2{e, 0}, t) -
                       shoot(h, x, info.p0 - Vec2{e, 0}, t)) / (2 * e);
      const Vec2 c2 = (shoot(h, x, info.p0 + Vec2{0, e}, t) -
                       shoot(h, x, info.p0 - Vec2{0, e}, t)) / (2 * e);
      const Mat2 jac{c1.x1, c2.x1, c1.x2, c2.x2};
      const Vec2 step = solve(jac, f);
      double damp = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 20; ++ls) {
        const Vec2 trial = info.p0 - damp * step;
        const Vec2 ft = shoot(h, x, trial, t) - y;
        if (norm(ft) < info.residual) {
          info.p0 = trial;
          f = ft;
          info.residual = norm(ft);
          moved = true;
          break;
        }
        damp *= 0.5;
      }
      if (!moved) break;
    }
    info.converged = info.residual < kShootingTol;
    if (info.converged) {
      info.action = flow_with_action(h, {x, info.p0}, t, t / kShootingSteps).action.back();
    }
  } catch (const NumericalError&) {
    info.converged = false;
  }
  return info;
}

}  // namespace

double discrete_action(const Lagrangian& l, const std::vector<Vec2>& nodes, double t0,
                       double t1) {
  if (nodes.size() < 2) throw PreconditionError("curve needs at least two nodes");
  const double tau = (t1 - t0) / static_cast<double>(nodes.size() - 1);
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
    total += tau * segment_terms(l, nodes[k], nodes[k + 1], tau).l;
  }
  return total;
}

std::vector<Vec2> euler_lagrange_residual(const Lagrangian& l,
                                          const CurveDiscretization& c) {
  const std::size_t n = c.nodes.size();
  std::vector<Vec2> out(n);
  if (n < 3) return out;
  const double tau = (c.t1 - c.t0) / static_cast<double>(n - 1);
  std::vector<double> z;
  for (std::size_t k = 1; k + 1 < n; ++k) {
    z.push_back(c.nodes[k].x1);
    z.push_back(c.nodes[k].x2);
  }
  std::vector<double> g(z.size());
  action_and_gradient(l, c.nodes.front(), c.nodes.back(), tau, z, g);
  for (std::size_t k = 1; k + 1 < n; ++k) {
    out[k] = Vec2{g[2 * (k - 1)], g[2 * (k - 1) + 1]} / tau;
  }
  return out;
}

ActionResult fundamental_solution(const Hamiltonian& h, double t, Vec2 x, Vec2 y,
                                  int nodes) {
  if (!(t > 0.0)) throw PreconditionError("fundamental solution needs t > 0");
  if (nodes < 1) throw PreconditionError("fundamental solution needs N >= 1");
  const Lagrangian l = legendre(h);
  const double tau = t / nodes;
  ActionResult r;
  std::vector<double> z = straight_line_interior(x, y, nodes);
  if (!z.empty()) {
    const auto opt = lbfgs_minimize(
        [&](const std::vector<double>& q, std::vector<double>& g) {
          return action_and_gradient(l, x, y, tau, q, g);
        },
        z, kActionGradientTol, 2000);
    z = opt.x;
    r.residual = opt.grad_norm;
  }
  r.minimizer.nodes = unpack(x, y, z);
  r.minimizer.t0 = 0.0;
  r.minimizer.t1 = t;
  r.minimizer.action_value = discrete_action(l, r.minimizer.nodes, 0.0, t);
  for (const Vec2& e : euler_lagrange_residual(l, r.minimizer)) {
    r.el_residual = std::max(r.el_residual, norm(e));
  }

  const Vec2 v0 = (r.minimizer.nodes[1] - r.minimizer.nodes[0]) / tau;
  const Vec2 p_guess = momentum_for_velocity(h, 0.5 * (r.minimizer.nodes[0] + r.minimizer.nodes[1]), v0);
  r.shooting = shooting_refine(h, t, x, y, p_guess);
  r.converged = r.residual < kActionGradientTol || r.shooting.converged;
  r.value = r.shooting.converged ? r.shooting.action : r.minimizer.action_value;
  return r;
}

// ---------------------------------------------------------------------------

ActionEvaluator::ActionEvaluator(Hamiltonian h, double t, int nodes)
    : l_(legendre(h)), t_(t), nodes_(nodes) {
  if (!(t > 0.0)) throw PreconditionError("action evaluator needs t > 0");
}

double ActionEvaluator::straight(Vec2 x, Vec2 y) const {
  if (l_.hamiltonian().position_independent()) return t_ * l_(x, (y - x) / t_);
  std::vector<Vec2> nodes;
  for (int k = 0; k <= nodes_; ++k) {
    nodes.push_back(x + (static_cast<double>(k) / nodes_) * (y - x));
  }
  return discrete_action(l_, nodes, 0.0, t_);
}

double ActionEvaluator::operator()(Vec2 x, Vec2 y) const {
  if (l_.hamiltonian().position_independent()) return t_ * l_(x, (y - x) / t_);
  const double tau = t_ / nodes_;
  const auto opt = lbfgs_minimize(
      [&](const std::vector<double>& q, std::vector<double>& g) {
        return action_and_gradient(l_, x, y, tau, q, g);
      },
      straight_line_interior(x, y, nodes_), 1e-11, 300);
  return opt.f;
}

// ---------------------------------------------------------------------------

namespace {

Vec2 clamp_to(const Box2& b, Vec2 y) {
  return {std::clamp(y.x1, b.lo.x1, b.hi.x1), std::clamp(y.x2, b.lo.x2, b.hi.x2)};
}

bool on_boundary(const Box2& b, Vec2 y) {
  const double tol = 1e-8 * std::max(b.diameter(), 1e-12);
  return y.x1 - b.lo.x1 <= tol || b.hi.x1 - y.x1 <= tol || y.x2 - b.lo.x2 <= tol ||
         b.hi.x2 - y.x2 <= tol;
}

struct GridScan {
  int n = 0;
  std::vector<Vec2> pts;
  std::vector<double> vals;  // objective to be minimized
  double spacing = 0.0;
};

GridScan scan(const Box2& box, int n, const std::function<double(Vec2)>& f) {
  if (n < 2) throw PreconditionError("grid resolution must be at least 2");
  GridScan g;
  g.n = n;
  g.pts.resize(static_cast<std::size_t>(n * n));
  g.vals.resize(g.pts.size());
  const Vec2 span = box.hi - box.lo;
  g.spacing = std::max(span.x1, span.x2) / (n - 1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Vec2 y{box.lo.x1 + span.x1 * i / (n - 1), box.lo.x2 + span.x2 * j / (n - 1)};
      const auto k = static_cast<std::size_t>(i * n + j);
      g.pts[k] = y;
      g.vals[k] = f(y);
    }
  }
  return g;
}

// Indices of grid local minima, best first.
std::vector<std::size_t> local_minima(const GridScan& g) {
  std::vector<std::size_t> out;
  for (int i = 0; i < g.n; ++i) {
    for (int j = 0; j < g.n; ++j) {
      const auto k = static_cast<std::size_t>(i * g.n + j);
      bool is_min = true;
      for (int di = -1; di <= 1 && is_min; ++di) {
        for (int dj = -1; dj <= 1; ++dj) {
          const int a = i + di, b = j + dj;
          if ((di == 0 && dj == 0) || a < 0 || b < 0 || a >= g.n || b >= g.n) continue;
          if (g.vals[static_cast<std::size_t>(a * g.n + b)] < g.vals[k]) {
            is_min = false;
            break;
          }
        }
      }
      if (is_min) out.push_back(k);
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [&](std::size_t a, std::size_t b) { return g.vals[a] < g.vals[b]; });
  return out;
}

struct Refined {
  Vec2 y;
  double f;
};

Refined refine(const std::function<double(Vec2)>& f, const Box2& box, Vec2 start,
               double spacing) {
  auto clamped = [&](Vec2 y) { return f(clamp_to(box, y)); };
  const auto nm = nelder_mead_2d(clamped, start, 0.5 * spacing, 1e-10, 8);
  return {clamp_to(box, nm.x), nm.f};
}

}  // namespace

LaxOleinikNeg lax_oleinik_neg(const Hamiltonian& h, const ScalarField& u0, double t,
                              Vec2 x, const Box2& search, const LaxOleinikOptions& opt) {
  if (!(t > 0.0)) throw PreconditionError("Lax-Oleinik evolution needs t > 0");
  const ActionEvaluator a(h, t, opt.action_nodes);
  const bool cheap = h.position_independent();
  const auto coarse = [&](Vec2 y) { return u0(y) + (cheap ? a(y, x) : a.straight(y, x)); };
  const auto fine = [&](Vec2 y) { return u0(y) + a(y, x); };
  const GridScan g = scan(search, opt.grid_resolution, coarse);
  const auto mins = local_minima(g);
  LaxOleinikNeg r;
  r.value = std::numeric_limits<double>::infinity();
  const std::size_t starts = std::min<std::size_t>(mins.size(), 4);
  for (std::size_t s = 0; s < starts; ++s) {
    const Refined c = refine(fine, search, g.pts[mins[s]], g.spacing);
    if (c.f < r.value) {
      r.value = c.f;
      r.argmin = c.y;
    }
  }
  r.boundary_hit = on_boundary(search, r.argmin);
  return r;
}

Box2 lax_oleinik_box(Vec2 x, double t, double lambda) {
  return Box2::around(x, 1.05 * lambda * t);
}

LaxOleinikPos lax_oleinik_pos(const Hamiltonian& h, const ScalarField& u0, double t,
                              Vec2 x, const Box2& search, const LaxOleinikOptions& opt,
                              std::optional<double> lambda) {
  if (!(t > 0.0)) throw PreconditionError("Lax-Oleinik evolution needs t > 0");
  if (t > opt.t0 * (1.0 + 1e-12)) {
    throw PreconditionError("t = " + std::to_string(t) + " exceeds the local horizon t0 = " +
                            std::to_string(opt.t0));
  }
  if (lambda) {
    const double r = *lambda * t;
    if (search.lo.x1 > x.x1 - r || search.lo.x2 > x.x2 - r || search.hi.x1 < x.x1 + r ||
        search.hi.x2 < x.x2 + r) {
      throw PreconditionError("search box does not contain the ball B(x, lambda t)");
    }
  }
  const ActionEvaluator a(h, t, opt.action_nodes);
  const bool cheap = h.position_independent();
  const auto coarse = [&](Vec2 y) { return -(u0(y) - (cheap ? a(x, y) : a.straight(x, y))); };
  const auto fine = [&](Vec2 y) { return -(u0(y) - a(x, y)); };
  const GridScan g = scan(search, opt.grid_resolution, coarse);
  const auto maxima = local_minima(g);

  std::vector<Refined> found;
  const std::size_t starts = std::min<std::size_t>(maxima.size(), 8);
  for (std::size_t s = 0; s < starts; ++s) {
    found.push_back(refine(fine, search, g.pts[maxima[s]], g.spacing));
  }
  std::stable_sort(found.begin(), found.end(),
                   [](const Refined& p, const Refined& q) { return p.f < q.f; });
  // Cluster refined maximizers; the best of each cluster represents it.
  std::vector<Refined> clusters;
  for (const Refined& c : found) {
    const bool merged = std::any_of(clusters.begin(), clusters.end(), [&](const Refined& k) {
      return distance(k.y, c.y) <= opt.cluster_radius;
    });
    if (!merged) clusters.push_back(c);
  }
  LaxOleinikPos r;
  r.argmax = clusters.front().y;
  r.value = -clusters.front().f;
  r.gap = clusters.size() > 1 ? clusters[1].f - clusters[0].f
                              : std::numeric_limits<double>::infinity();
  r.unique = r.gap > opt.uniqueness_gap;
  r.boundary_hit = on_boundary(search, r.argmax);
  for (const Refined& c : clusters) r.candidates.push_back(c.y);
  return r;
}

double concavity_spot_check(const Hamiltonian& h, double t, Vec2 x, double radius,
                            int samples, unsigned seed) {
  const ActionEvaluator a(h, t);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto draw = [&] {
    for (;;) {
      const Vec2 d{u(rng), u(rng)};
      if (norm(d) <= 1.0) return x + radius * d;
    }
  };
  double worst = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < samples; ++k) {
    const Vec2 p = draw(), q = draw();
    const double d2 = norm2(p - q);
    if (d2 < 1e-12 * radius * radius) continue;
    const Vec2 m = 0.5 * (p + q);
    const double f = 0.5 * (-a(x, p)) + 0.5 * (-a(x, q)) + a(x, m);
    worst = std::max(worst, 8.0 * f / d2);
  }
  return worst;
}

}  // namespace hjsing
