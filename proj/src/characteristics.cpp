#include "hjsing/characteristics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hjsing/errors.hpp"
#include "hjsing/optimize.hpp"

namespace hjsing {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const MinOfSmooth& require_min_of_smooth(const SolutionRep& u, const char* who) {
  const auto* m = dynamic_cast<const MinOfSmooth*>(&u);
  if (!m) {
    throw PreconditionError(std::string(who) + " propagation needs a min_of_smooth solution");
  }
  return *m;
}

std::size_t step_count(double T, double dt) {
  if (!(T > 0.0)) throw PreconditionError("horizon T must be positive");
  if (!(dt > 0.0)) throw PreconditionError("time step dt must be positive");
  const double n = std::round(T / dt);
  if (n < 1.0 || n > 1e7) throw PreconditionError("T / dt must lie in [1, 1e7]");
  return static_cast<std::size_t>(n);
}

void require_singular_noncritical(const Hamiltonian& h, const SolutionRep& u, Vec2 x0) {
  const Superdiff2D sd = u.superdiff(x0);
  if (sd.sing_class == 0) {
    throw PreconditionError("start point is not singular: D+u(x0) is a single covector");
  }
  const CriticalityTest c = criticality(h, sd.set, x0);
  if (c.critical) {
    throw PreconditionError(
        "hypothesis 0 \xE2\x88\x89 co H_p(x0, D+u(x0)) violated: the start point is critical");
  }
}

// Indices of the active branches whose gradients are the two endpoints of
// a segment superdifferential.
std::pair<std::size_t, std::size_t> leading_pair(const MinOfSmooth& m, const Superdiff2D& sd,
                                                 Vec2 x) {
  std::size_t first = sd.active.front(), second = sd.active.back();
  double d1 = std::numeric_limits<double>::infinity(), d2 = d1;
  for (std::size_t i : sd.active) {
    const Vec2 g = m.branches()[i].gradient(x);
    const double a = distance(g, sd.reachable[0]), b = distance(g, sd.reachable[1]);
    if (a < d1) {
      d1 = a;
      first = i;
    }
    if (b < d2) {
      d2 = b;
      second = i;
    }
  }
  return {first, second};
}

struct SnapResult {
  Vec2 x;
  double gap = 0.0;
  double displacement = 0.0;
  bool crossed = false;  // another branch undercuts the pair
};

SnapResult snap(const MinOfSmooth& m, std::size_t i, std::size_t j, Vec2 y,
                const StrictOptions& opt) {
  const Branch& bi = m.branches()[i];
  const Branch& bj = m.branches()[j];
  SnapResult r;
  r.x = y;
  for (int it = 0; it < opt.snap_iterations; ++it) {
    const double g = bi.value(r.x) - bj.value(r.x);
    if (std::abs(g) <= opt.snap_tol) break;
    const Vec2 n = bi.gradient(r.x) - bj.gradient(r.x);
    const double n2 = norm2(n);
    if (n2 == 0.0) break;
    r.x -= (g / n2) * n;
  }
  r.gap = std::abs(bi.value(r.x) - bj.value(r.x));
  r.displacement = distance(r.x, y);
  const double pair = std::min(bi.value(r.x), bj.value(r.x));
  for (std::size_t k = 0; k < m.branches().size(); ++k) {
    if (k == i || k == j) continue;
    if (m.branches()[k].value(r.x) < pair - 10.0 * opt.snap_tol) r.crossed = true;
  }
  return r;
}

// lambda with p = lambda p1 + (1 - lambda) p2.
double barycentric(Vec2 p, Vec2 p1, Vec2 p2) {
  const Vec2 d = p1 - p2;
  const double d2 = norm2(d);
  return d2 == 0.0 ? kNaN : std::clamp(dot(p - p2, d) / d2, 0.0, 1.0);
}

void finalize(SingularArc& arc) {
  arc.omega.assign(arc.size(), 0.0);
  double w = 0.0;
  for (std::size_t k = 0; k < arc.size(); ++k) {
    w = std::max(w, distance(arc.velocities[k], arc.velocities[0]));
    arc.omega[k] = w;
  }
  arc.lip = 0.0;
  for (std::size_t k = 0; k + 1 < arc.size(); ++k) {
    const double dt = arc.times[k + 1] - arc.times[k];
    if (dt > 0.0) arc.lip = std::max(arc.lip, distance(arc.points[k + 1], arc.points[k]) / dt);
  }
}

void truncate(SingularArc& arc, const std::string& reason) {
  arc.truncated = true;
  arc.reason = reason;
}

enum class Selection { strict, generalized };

SingularArc propagate_on_segments(const Hamiltonian& h, const SolutionRep& u, Vec2 x0,
                                  double T, double dt, Selection mode,
                                  const GeneralizedOptions& opt) {
  const MinOfSmooth& m =
      require_min_of_smooth(u, mode == Selection::strict ? "strict" : "generalized");
  require_singular_noncritical(h, u, x0);
  const std::size_t n = step_count(T, dt);
  const StrictOptions& so = opt.snap;

  SingularArc arc;
  arc.kind = mode == Selection::strict ? ArcKind::strict : ArcKind::generalized;
  Vec2 x = x0;
  int run = 0;
  for (std::size_t k = 0; k <= n; ++k) {
    const Superdiff2D sd = m.superdiff(x);
    if (k > 0) {
      const bool junction = sd.sing_class == 2;
      const bool critical = criticality(h, sd.set, x).critical;
      if (mode == Selection::generalized && junction) {
        truncate(arc, "junction");
        break;
      }
      if (critical) {
        truncate(arc, "critical");
        break;
      }
      if (junction) {
        truncate(arc, "junction");
        break;
      }
      if (sd.sing_class == 0) {
        truncate(arc, "lost-singularity");
        break;
      }
    } else if (sd.sing_class == 2 && mode == Selection::generalized) {
      throw PreconditionError("generalized propagation needs a segment superdifferential at x0");
    }

    Vec2 p, v;
    double lambda = kNaN;
    if (mode == Selection::strict) {
      const EnergySelection e = energy_argmin(h, sd.set, x);
      p = e.p_min;
      v = h.grad_p(x, p);
      if (sd.set.kind() == SetKind::segment) lambda = barycentric(p, sd.reachable[0], sd.reachable[1]);
    } else {
      const Vec2 p1 = sd.reachable[0], p2 = sd.reachable[1];
      const Vec2 a = h.grad_p(x, p1), b = h.grad_p(x, p2);
      const Vec2 d = p2 - p1;
      const double db = dot(d, b), da = dot(d, a);
      double root = db / (db - da);
      if (!(root >= 0.0 && root <= 1.0)) {
        root = std::clamp(std::isfinite(root) ? root : 0.5, 0.0, 1.0);
        ++arc.diagnostics.lambda_clamped;
        ++run;
        arc.diagnostics.longest_clamp_run = std::max(arc.diagnostics.longest_clamp_run, run);
        if (run > opt.clamp_persistence) arc.diagnostics.lambda_persistent = true;
      } else {
        run = 0;
      }
      lambda = root;
      v = lambda * a + (1.0 - lambda) * b;
      p = lambda * p1 + (1.0 - lambda) * p2;
    }
    arc.times.push_back(static_cast<double>(k) * dt);
    arc.points.push_back(x);
    arc.covectors.push_back(p);
    arc.velocities.push_back(v);
    arc.lambdas.push_back(lambda);
    arc.singular.push_back(sd.sing_class > 0);
    if (k == n) break;

    const auto [i, j] = leading_pair(m, sd, x);
    const SnapResult s = snap(m, i, j, x + dt * v, so);
    if (s.crossed) {
      truncate(arc, "junction");
      break;
    }
    arc.diagnostics.max_snap_displacement =
        std::max(arc.diagnostics.max_snap_displacement, s.displacement);
    arc.diagnostics.max_branch_gap = std::max(arc.diagnostics.max_branch_gap, s.gap);
    if (s.gap > 10.0 * so.snap_tol || s.displacement > so.snap_curvature * dt * dt) {
      truncate(arc, "lost-singularity");
      break;
    }
    x = s.x;
  }
  if (mode == Selection::generalized) {
    const EnergySelection e = energy_argmin(h, u, x0);
    arc.diagnostics.initial_velocity_error = distance(arc.velocities[0], h.grad_p(x0, e.p_min));
    arc.diagnostics.initial_velocity_flag = arc.diagnostics.initial_velocity_error > opt.init_tol;
  }
  if (arc.diagnostics.lambda_persistent) {
    arc.diagnostics.notes.push_back("lambda root stayed outside [0, 1] for more than " +
                                    std::to_string(opt.clamp_persistence) + " steps");
  }
  finalize(arc);
  return arc;
}

}  // namespace

const char* arc_kind_name(ArcKind k) {
  switch (k) {
    case ArcKind::strict: return "strict";
    case ArcKind::mollified: return "mollified";
    case ArcKind::generalized: return "generalized";
    case ArcKind::intrinsic: return "intrinsic";
  }
  return "?";
}

Vec2 SingularArc::at(double t) const {
  if (points.empty()) throw PreconditionError("empty arc");
  if (t <= times.front()) return points.front();
  if (t >= times.back()) return points.back();
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - times.begin());
  const double w = (t - times[k - 1]) / (times[k] - times[k - 1]);
  return points[k - 1] + w * (points[k] - points[k - 1]);
}

SingularArc propagate_strict(const Hamiltonian& h, const SolutionRep& u, Vec2 x0, double T,
                             double dt, const StrictOptions& opt) {
  GeneralizedOptions g;
  g.snap = opt;
  return propagate_on_segments(h, u, x0, T, dt, Selection::strict, g);
}

SingularArc propagate_generalized(const Hamiltonian& h, const SolutionRep& u, Vec2 x0,
                                  double T, double dt, const GeneralizedOptions& opt) {
  return propagate_on_segments(h, u, x0, T, dt, Selection::generalized, opt);
}

// ---------------------------------------------------------------------------
// Mollified construction

namespace {

std::vector<double> softmin_weights(const MinOfSmooth& u, Vec2 x, double eps) {
  const auto& bs = u.branches();
  std::vector<double> w(bs.size());
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < bs.size(); ++i) {
    w[i] = bs[i].value(x);
    lo = std::min(lo, w[i]);
  }
  double total = 0.0;
  for (double& wi : w) {
    wi = std::exp(-(wi - lo) / eps);
    total += wi;
  }
  for (double& wi : w) wi /= total;
  return w;
}

}  // namespace

double softmin(const MinOfSmooth& u, Vec2 x, double eps) {
  if (!(eps > 0.0)) throw PreconditionError("softmin temperature must be positive");
  const auto& bs = u.branches();
  double lo = std::numeric_limits<double>::infinity();
  for (const Branch& b : bs) lo = std::min(lo, b.value(x));
  double total = 0.0;
  for (const Branch& b : bs) total += std::exp(-(b.value(x) - lo) / eps);
  return lo - eps * std::log(total);
}

Vec2 softmin_gradient(const MinOfSmooth& u, Vec2 x, double eps) {
  if (!(eps > 0.0)) throw PreconditionError("softmin temperature must be positive");
  const auto w = softmin_weights(u, x, eps);
  Vec2 g;
  for (std::size_t i = 0; i < w.size(); ++i) g += w[i] * u.branches()[i].gradient(x);
  return g;
}

SingularArc integrate_mollified(const Hamiltonian& h, const MinOfSmooth& u, Vec2 x0, double T,
                                double dt, double eps) {
  const std::size_t n = step_count(T, dt);
  const auto rhs = [&](Vec2 x) { return h.grad_p(x, softmin_gradient(u, x, eps)); };
  SingularArc arc;
  arc.kind = ArcKind::mollified;
  const double c = u.semiconcavity_constant();
  Vec2 x = x0;
  for (std::size_t k = 0; k <= n; ++k) {
    const Vec2 p = softmin_gradient(u, x, eps);
    arc.times.push_back(static_cast<double>(k) * dt);
    arc.points.push_back(x);
    arc.covectors.push_back(p);
    arc.velocities.push_back(h.grad_p(x, p));
    arc.lambdas.push_back(kNaN);
    arc.singular.push_back(is_singular(u, x, std::max(1e-6, 10.0 * eps)));
    if (k == n) break;
    // Step bound from the Lipschitz constant of the right-hand side:
    // |H_pp| (C + max|Du_i - Du_j|^2 / (4 eps)).
    double spread = 0.0;
    const auto& bs = u.branches();
    for (std::size_t i = 0; i < bs.size(); ++i) {
      for (std::size_t j = i + 1; j < bs.size(); ++j) {
        spread = std::max(spread, norm2(bs[i].gradient(x) - bs[j].gradient(x)));
      }
    }
    const double lip = h.hess_p(x, p).operator_norm() * (c + spread / (4.0 * eps));
    const double hmax = lip > 0.0 ? std::min(dt, 1.0 / lip) : dt;
    const auto sub = static_cast<std::size_t>(std::ceil(dt / hmax - 1e-12));
    const double hs = dt / static_cast<double>(sub);
    for (std::size_t s = 0; s < sub; ++s) {
      const Vec2 k1 = rhs(x);
      const Vec2 k2 = rhs(x + 0.5 * hs * k1);
      const Vec2 k3 = rhs(x + 0.5 * hs * k2);
      const Vec2 k4 = rhs(x + hs * k3);
      x += (hs / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    if (!is_finite(x) || !u.region().contains(x)) {
      truncate(arc, "left-region");
      break;
    }
  }
  finalize(arc);
  return arc;
}

SingularArc propagate_strict_mollified(const Hamiltonian& h, const SolutionRep& u, Vec2 x0,
                                       double T, double dt,
                                       const std::vector<double>& eps_schedule,
                                       const MollifiedOptions& opt) {
  const MinOfSmooth& m = require_min_of_smooth(u, "mollified");
  if (eps_schedule.empty()) throw PreconditionError("empty softmin schedule");
  for (double e : eps_schedule) {
    if (!(e > 0.0)) throw PreconditionError("softmin temperatures must be positive");
  }
  if (is_singular(u, x0)) {
    require_singular_noncritical(h, u, x0);
  }
  std::vector<SingularArc> arcs;
  for (double e : eps_schedule) arcs.push_back(integrate_mollified(h, m, x0, T, dt, e));
  SingularArc out = arcs.back();
  ArcDiagnostics& d = out.diagnostics;
  if (arcs.size() < 2) {
    d.converged = false;
    d.notes.push_back("a single softmin temperature cannot certify convergence");
    return out;
  }
  const SingularArc& prev = arcs[arcs.size() - 2];
  const double en = eps_schedule.back(), ep = eps_schedule[eps_schedule.size() - 2];
  bool decreasing = true;
  for (std::size_t i = 1; i < eps_schedule.size(); ++i) {
    decreasing = decreasing && eps_schedule[i] < eps_schedule[i - 1];
  }
  const std::size_t len = std::min(prev.size(), out.size());
  double gap = 0.0;
  for (std::size_t k = 0; k < len; ++k) gap = std::max(gap, distance(out.points[k], prev.points[k]));
  d.schedule_gap = gap;
  if (decreasing) {
    const double w = en / (ep - en);
    for (std::size_t k = 0; k < len; ++k) {
      out.points[k] += w * (out.points[k] - prev.points[k]);
      out.velocities[k] += w * (out.velocities[k] - prev.velocities[k]);
      out.covectors[k] += w * (out.covectors[k] - prev.covectors[k]);
      out.singular[k] = is_singular(u, out.points[k], 1e-6);
    }
    out.points.resize(len);
    out.times.resize(len);
    out.velocities.resize(len);
    out.covectors.resize(len);
    out.lambdas.resize(len);
    out.singular.resize(len);
  }
  const double softmin_bias = en * std::log(static_cast<double>(m.branches().size()));
  d.converged = decreasing && gap <= opt.moll_tol && softmin_bias <= opt.moll_tol &&
                !prev.truncated && !arcs.back().truncated;
  if (!decreasing) d.notes.push_back("softmin schedule is not strictly decreasing");
  if (gap > opt.moll_tol) d.notes.push_back("last two softmin arcs differ by more than moll_tol");
  if (softmin_bias > opt.moll_tol) d.notes.push_back("eps log(#branches) exceeds moll_tol");
  finalize(out);
  return out;
}

// ---------------------------------------------------------------------------
// Intrinsic characteristic

SingularArc propagate_intrinsic(const Hamiltonian& h, const SolutionRep& u, Vec2 x0,
                                const std::vector<double>& t_grid, const IntrinsicOptions& opt) {
  if (t_grid.empty()) throw PreconditionError("empty time grid");
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    if (!(t_grid[i] > 0.0) || (i > 0 && !(t_grid[i] > t_grid[i - 1]))) {
      throw PreconditionError("time grid must be positive and strictly increasing");
    }
    if (t_grid[i] > opt.lax_oleinik.t0 * (1.0 + 1e-12)) {
      throw PreconditionError("time grid exceeds the local horizon t0");
    }
  }
  const ScalarField uf = [&u](Vec2 y) { return u.value(y); };
  SingularArc arc;
  arc.kind = ArcKind::intrinsic;
  arc.times.push_back(0.0);
  arc.points.push_back(x0);
  arc.singular.push_back(is_singular(u, x0));
  for (double t : t_grid) {
    const Box2 box = lax_oleinik_box(x0, t, opt.lambda);
    const LaxOleinikPos r = lax_oleinik_pos(h, uf, t, x0, box, opt.lax_oleinik, opt.lambda);
    arc.times.push_back(t);
    arc.points.push_back(r.argmax);
    arc.singular.push_back(is_singular(u, r.argmax, opt.singular_tol));
    if (!r.unique) ++arc.diagnostics.nonunique_samples;
    if (r.boundary_hit) ++arc.diagnostics.boundary_samples;
  }
  for (std::size_t k = 0; k + 1 < arc.size(); ++k) {
    arc.velocities.push_back((arc.points[k + 1] - arc.points[k]) / (arc.times[k + 1] - arc.times[k]));
  }
  arc.velocities.push_back(arc.velocities.back());
  arc.lambdas.assign(arc.size(), kNaN);
  const EnergySelection e = energy_argmin(h, u, x0);
  arc.diagnostics.initial_velocity_error = distance(arc.velocities[0], h.grad_p(x0, e.p_min));
  arc.diagnostics.initial_velocity_flag = arc.diagnostics.initial_velocity_error > opt.init_tol;
  if (arc.diagnostics.nonunique_samples > 0) {
    arc.diagnostics.notes.push_back("maximizer not unique at " +
                                    std::to_string(arc.diagnostics.nonunique_samples) + " samples");
  }
  finalize(arc);
  return arc;
}

// ---------------------------------------------------------------------------

Lip0Report validate_lip0(const SingularArc& arc, const Hamiltonian* h, const SolutionRep* u,
                         const Lip0Options& opt) {
  const std::size_t n = arc.size();
  if (n < 8) throw PreconditionError("Lip0 validation needs at least 8 samples");
  Lip0Report r;
  const Vec2 x0 = arc.points[0];
  const double t0 = arc.times[0];
  // Least squares for x(t) - x0 = v t over the first samples.
  const std::size_t m = std::min<std::size_t>(static_cast<std::size_t>(opt.fit_samples), n - 1);
  double tt = 0.0;
  Vec2 tx;
  for (std::size_t k = 1; k <= m; ++k) {
    const double s = arc.times[k] - t0;
    tt += s * s;
    tx += s * (arc.points[k] - x0);
  }
  r.v0 = tx / tt;

  r.omega.assign(n, 0.0);
  double w = 0.0, lip = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const Vec2 q = (arc.points[k + 1] - arc.points[k]) / (arc.times[k + 1] - arc.times[k]);
    lip = std::max(lip, norm(q));
    w = std::max(w, distance(q, r.v0));
    r.omega[k + 1] = w;
  }

  r.a = {"A: Lipschitz", std::isfinite(lip), false, lip, "Lipschitz constant " + std::to_string(lip)};

  if (h && u) {
    const CriticalityTest c = criticality(*h, *u, x0);
    r.b = {"B: noncritical start", !c.critical && !c.indeterminate, false,
           c.critical ? -c.boundary_distance : c.boundary_distance,
           c.critical ? "0 lies in co H_p(x0, D+u(x0))" : "0 outside co H_p(x0, D+u(x0))"};
    const EnergySelection e = energy_argmin(*h, *u, x0);
    const double err = distance(r.v0, h->grad_p(x0, e.p_min));
    r.c = {"C: initial velocity is H_p(x0, p_min)", err <= opt.c_tol, false, opt.c_tol - err,
           "|v(0) - H_p(x0, p_min)| = " + std::to_string(err)};
  } else {
    r.b = {"B: noncritical start", true, true, 0.0, "not evaluated without (H, u)"};
    r.c = {"C: initial velocity is H_p(x0, p_min)", true, true, 0.0, "not evaluated without (H, u)"};
  }

  const double horizon = arc.times.back() - t0;
  std::size_t kw = 2;
  while (kw + 1 < n && arc.times[kw + 1] - t0 <= opt.early_window * horizon) ++kw;
  const double bound = opt.d_tol * std::max(norm(r.v0), 1e-12);
  r.d = {"D: omega(t) -> 0", r.omega[kw] <= bound, arc.kind == ArcKind::intrinsic,
         bound - r.omega[kw],
         "omega over the first " + std::to_string(kw) + " samples is " + std::to_string(r.omega[kw])};
  if (r.d.informative) r.d.detail += " (informative: intrinsic arcs need not satisfy D)";
  r.pass = r.a.pass && r.b.pass && r.c.pass && (r.d.pass || r.d.informative);
  return r;
}

AppendixGap appendix_gap(const Hamiltonian& h, const SolutionRep& u, Vec2 x, Vec2 v_bar,
                         Vec2 p_bar) {
  const Superdiff2D sd = u.superdiff(x);
  AppendixGap g;
  g.directional = std::numeric_limits<double>::infinity();
  for (const Vec2& p : sd.set.extreme_points()) g.directional = std::min(g.directional, dot(p, v_bar));
  const Vec2 hp_bar = h.grad_p(x, p_bar);
  const auto merit = [&](Vec2 p) {
    return dot(p, v_bar) - g.directional + dot(p - p_bar, h.grad_p(x, p) - hp_bar);
  };
  g.mu = std::numeric_limits<double>::infinity();
  const auto consider = [&](Vec2 p) {
    const double f = merit(p);
    if (f < g.mu) {
      g.mu = f;
      g.argmin = p;
    }
  };
  for (const Vec2& p : sd.set.extreme_points()) consider(p);
  for (const auto& [a, b] : sd.set.edges()) {
    constexpr int kSamples = 2000;
    int best = 0;
    double fbest = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= kSamples; ++k) {
      const double f = merit(a + (static_cast<double>(k) / kSamples) * (b - a));
      if (f < fbest) {
        fbest = f;
        best = k;
      }
    }
    const double lo = std::max(0, best - 1) / static_cast<double>(kSamples);
    const double hi = std::min(kSamples, best + 1) / static_cast<double>(kSamples);
    const double s = golden_section([&](double q) { return merit(a + q * (b - a)); }, lo, hi, 1e-14);
    consider(a + s * (b - a));
  }
  if (sd.set.kind() == SetKind::polygon) {
    const auto& v = sd.set.extreme_points();
    constexpr int kGrid = 60;
    for (std::size_t t = 1; t + 1 < v.size(); ++t) {
      for (int i = 0; i <= kGrid; ++i) {
        for (int j = 0; i + j <= kGrid; ++j) {
          const double l1 = static_cast<double>(i) / kGrid, l2 = static_cast<double>(j) / kGrid;
          consider(l1 * v[0] + l2 * v[t] + (1.0 - l1 - l2) * v[t + 1]);
        }
      }
    }
  }
  g.p_bar_in_face = exposed_face(sd.set, v_bar).contains(p_bar, 1e-9);
  return g;
}

}  // namespace hjsing
