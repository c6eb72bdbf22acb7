#include "hjsing/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "hjsing/action.hpp"
#include "hjsing/errors.hpp"
#include "hjsing/optimize.hpp"

namespace hjsing {

namespace {

using nlohmann::json;

constexpr double kInf = std::numeric_limits<double>::infinity();

CheckEntry make_entry(std::string name, bool pass, double margin, int start,
                      std::string detail = {}) {
  CheckEntry e;
  e.name = std::move(name);
  e.status = pass ? "pass" : "fail";
  e.margin = margin;
  e.params["start"] = start;
  e.detail = std::move(detail);
  return e;
}

CheckEntry informative(std::string name, int start, std::string detail) {
  CheckEntry e = make_entry(std::move(name), false, 0.0, start, std::move(detail));
  e.status = "informative";
  return e;
}

CheckEntry tagged(CheckEntry e, const std::string& name, int start) {
  e.name = name;
  e.params["start"] = start;
  return e;
}

// min of H(x, .) over the set: a dense scan of each edge refined by golden
// section, plus a barycentric grid on polygon interiors.
double dense_min_energy(const Hamiltonian& h, Vec2 x, const ConvexSet2D& set) {
  const auto& pts = set.extreme_points();
  if (set.kind() == SetKind::point) return h(x, pts.front());
  double best = kInf;
  for (const auto& [a, b] : set.edges()) {
    const auto f = [&](double s) { return h(x, a + s * (b - a)); };
    constexpr int n = 4000;
    int ibest = 0;
    double fbest = kInf;
    for (int i = 0; i <= n; ++i) {
      const double v = f(double(i) / n);
      if (v < fbest) fbest = v, ibest = i;
    }
    const double lo = std::max(0.0, double(ibest - 1) / n);
    const double hi = std::min(1.0, double(ibest + 1) / n);
    best = std::min({best, fbest, f(golden_section(f, lo, hi))});
  }
  if (set.kind() == SetKind::polygon) {
    constexpr int m = 60;
    for (std::size_t t = 1; t + 1 < pts.size(); ++t) {
      for (int i = 0; i <= m; ++i)
        for (int j = 0; i + j <= m; ++j) {
          const double a = double(i) / m, b = double(j) / m;
          best = std::min(best, h(x, pts[0] + a * (pts[t] - pts[0]) + b * (pts[t + 1] - pts[0])));
        }
    }
  }
  return best;
}

CheckEntry energy_entry(const Scenario& s, const SingularArc& arc, int start) {
  double worst = 0.0;
  std::size_t kw = 0;
  for (std::size_t k = 0; k < arc.size(); ++k) {
    const Vec2 x = arc.points[k];
    const Superdiff2D d = s.u->superdiff(x);
    const double dev = std::abs((*s.h)(x, arc.covectors[k]) - dense_min_energy(*s.h, x, d.set));
    if (dev > worst) worst = dev, kw = k;
  }
  CheckEntry e = make_entry("energy", worst < s.energy_tol, s.energy_tol - worst, start);
  e.witnesses.push_back({"worst energy gap", arc.times[kw], arc.times[kw], worst});
  e.params["samples"] = double(arc.size());
  return e;
}

CheckEntry lip0_entry(const Scenario& s, const SingularArc& arc, const std::string& name,
                      int start) {
  const Lip0Report r = validate_lip0(arc, s.h.get(), s.u.get());
  double margin = kInf;
  std::string detail;
  CheckEntry e;
  for (const ConditionResult* c : {&r.a, &r.b, &r.c, &r.d}) {
    e.params["margin_" + c->name] = c->margin;
    if (!c->informative) margin = std::min(margin, c->margin);
    if (!c->detail.empty()) detail += (detail.empty() ? "" : "; ") + c->name + ": " + c->detail;
  }
  CheckEntry out = make_entry(name, r.pass, margin, start, detail);
  out.params.insert(e.params.begin(), e.params.end());
  out.params["v0_1"] = r.v0.x1;
  out.params["v0_2"] = r.v0.x2;
  return out;
}

CheckEntry perp_entry(const Scenario& s, const SingularArc& gen, int start) {
  const auto* mos = dynamic_cast<const MinOfSmooth*>(s.u.get());
  if (!mos) return informative("perp", start, "needs a min_of_smooth solution");
  const auto& br = mos->branches();
  double worst = 0.0;
  std::size_t kw = 0, counted = 0;
  for (std::size_t k = 0; k < gen.size(); ++k) {
    const double l = gen.lambdas[k];
    if (!std::isfinite(l) || l <= 1e-9 || l >= 1 - 1e-9) continue;
    const Vec2 x = gen.points[k];
    std::vector<std::pair<double, std::size_t>> vals;
    for (std::size_t i = 0; i < br.size(); ++i) vals.emplace_back(br[i].value(x), i);
    std::partial_sort(vals.begin(), vals.begin() + 2, vals.end());
    const Vec2 p1 = br[vals[0].second].gradient(x), p2 = br[vals[1].second].gradient(x);
    const double r = std::abs(dot(gen.velocities[k], p2 - p1));
    ++counted;
    if (r > worst) worst = r, kw = k;
  }
  if (counted == 0) return informative("perp", start, "no sample with interior selection");
  CheckEntry e = make_entry("perp", worst < s.perp_tol, s.perp_tol - worst, start);
  e.witnesses.push_back({"worst |<v, p2 - p1>|", gen.times[kw], gen.times[kw], worst});
  e.params["interior_samples"] = double(counted);
  return e;
}

std::vector<CheckEntry> intrinsic_entries(const Scenario& s, const SingularArc& arc,
                                          Vec2 x0, int start) {
  std::vector<CheckEntry> out;
  {
    const double err = arc.diagnostics.initial_velocity_error;
    constexpr double tol = 0.02;
    CheckEntry e = make_entry("intrinsic_velocity", err < tol, tol - err, start);
    e.params["initial_velocity_error"] = err;
    out.push_back(e);
  }
  if (!s.h->position_independent()) {
    out.push_back(informative("intrinsic_oracle", start,
                              "grid oracle uses the closed-form action; H depends on x"));
    return out;
  }
  // Brute-force maximization of u(y) - A_t(x0, y) on a grid of spacing g.
  constexpr double g = 1e-3;
  double worst_slack = kInf;
  CheckEntry e;
  for (std::size_t k = 1; k < arc.size(); ++k) {
    const double t = arc.times[k];
    const ActionEvaluator a(*s.h, t);
    Box2 box = lax_oleinik_box(x0, t, s.lambda);
    const Box2& reg = s.u->region();
    box.lo = {std::max(box.lo.x1, reg.lo.x1), std::max(box.lo.x2, reg.lo.x2)};
    box.hi = {std::min(box.hi.x1, reg.hi.x1), std::min(box.hi.x2, reg.hi.x2)};
    const int n1 = int((box.hi.x1 - box.lo.x1) / g), n2 = int((box.hi.x2 - box.lo.x2) / g);
    Vec2 best;
    double fbest = -kInf;
    for (int i = 0; i <= n1; ++i)
      for (int j = 0; j <= n2; ++j) {
        const Vec2 y{box.lo.x1 + i * g, box.lo.x2 + j * g};
        const double f = s.u->value(y) - a(x0, y);
        if (f > fbest) fbest = f, best = y;
      }
    const double d = distance(arc.points[k], best);
    e.witnesses.push_back({"distance to grid maximizer", t, t, d});
    worst_slack = std::min(worst_slack, 2 * g - d);
  }
  CheckEntry oracle = make_entry("intrinsic_oracle", worst_slack > 0, worst_slack, start);
  oracle.witnesses = e.witnesses;
  oracle.params["grid_spacing"] = g;
  out.push_back(oracle);
  return out;
}

std::vector<CheckEntry> fixed_point_entries(const Scenario& s) {
  std::vector<CheckEntry> out;
  const double tmax = *std::max_element(s.fixed_point_times.begin(), s.fixed_point_times.end());
  const double pad = 1.05 * s.lambda * tmax;
  const Box2& reg = s.u->region();
  const Box2 inner{reg.lo + Vec2{pad, pad}, reg.hi - Vec2{pad, pad}};
  if (!(inner.lo.x1 < inner.hi.x1 && inner.lo.x2 < inner.hi.x2)) {
    out.push_back(make_entry("fixed_point", false, -kInf, -1,
                             "region too small for the search balls"));
    return out;
  }
  std::mt19937_64 rng(s.seed);
  std::uniform_real_distribution<double> d1(inner.lo.x1, inner.hi.x1), d2(inner.lo.x2, inner.hi.x2);
  std::vector<Vec2> pts;
  for (int i = 0; i < s.fixed_point_samples; ++i) {
    const double a = d1(rng);
    pts.push_back({a, d2(rng)});
  }
  const ScalarField u0 = [u = s.u](Vec2 y) { return u->value(y); };
  LaxOleinikOptions opt;
  opt.grid_resolution = s.grid_resolution;
  for (double t : s.fixed_point_times) {
    double worst = 0.0;
    Vec2 xw;
    int boundary = 0;
    for (Vec2 x : pts) {
      const LaxOleinikNeg r = lax_oleinik_neg(*s.h, u0, t, x, lax_oleinik_box(x, t, s.lambda), opt);
      const double dev = std::abs(r.value - s.u->value(x));
      boundary += r.boundary_hit;
      if (dev > worst) worst = dev, xw = x;
    }
    char name[64];
    std::snprintf(name, sizeof name, "fixed_point(t=%g)", t);
    CheckEntry e = make_entry(name, worst < s.fixed_point_tol, s.fixed_point_tol - worst, -1);
    e.witnesses.push_back({"worst |T_t u - u|", t, t, worst});
    e.params["t"] = t;
    e.params["samples"] = double(pts.size());
    e.params["worst_x1"] = xw.x1;
    e.params["worst_x2"] = xw.x2;
    e.params["boundary_hits"] = boundary;
    out.push_back(e);
  }
  return out;
}

void run_start(const Scenario& s, int i, RunReport& rep) {
  const Vec2 x0 = s.starts[i];
  const Hamiltonian& h = *s.h;
  const SolutionRep& u = *s.u;
  const auto add_arc = [&](const std::string& kind, SingularArc arc) {
    rep.arcs.push_back({i, kind, {}, std::move(arc)});
    return &rep.arcs.back().arc;
  };

  SingularArc strict, gen;
  try {
    strict = propagate_strict(h, u, x0, s.horizon, s.dt);
    gen = propagate_generalized(h, u, x0, s.horizon, s.dt);
  } catch (const PreconditionError& e) {
    CheckEntry pe = make_entry("precondition", false, -kInf, i, e.what());
    pe.params["x1"] = x0.x1;
    pe.params["x2"] = x0.x2;
    rep.entries.push_back(pe);
    return;
  }
  add_arc("strict", strict);
  add_arc("generalized", gen);

  if (s.expect_truncation) {
    const bool ok = gen.truncated && gen.reason == *s.expect_truncation;
    CheckEntry e = make_entry("truncation", ok, ok ? 0.0 : -1.0, i,
                              "generalized arc: " + (gen.truncated ? gen.reason : "not truncated"));
    e.params["t_stop"] = gen.times.back();
    e.params["x1_stop"] = gen.points.back().x1;
    e.params["x2_stop"] = gen.points.back().x2;
    rep.entries.push_back(e);
  }

  SingularArc intrinsic;
  if (!s.intrinsic_grid.empty()) {
    IntrinsicOptions io;
    io.lambda = s.lambda;
    io.lax_oleinik.t0 = s.t0;
    io.lax_oleinik.grid_resolution = s.grid_resolution;
    intrinsic = propagate_intrinsic(h, u, x0, s.intrinsic_grid, io);
    add_arc("intrinsic", intrinsic);
  }

  if (s.wants("energy")) rep.entries.push_back(energy_entry(s, strict, i));
  if (s.wants("lip0")) {
    rep.entries.push_back(lip0_entry(s, strict, "lip0(strict)", i));
    if (!intrinsic.points.empty()) {
      try {
        rep.entries.push_back(lip0_entry(s, intrinsic, "lip0(intrinsic)", i));
      } catch (const PreconditionError& e) {
        rep.entries.push_back(informative("lip0(intrinsic)", i, e.what()));
      }
    }
  }
  if (s.wants("injectivity"))
    rep.entries.push_back(tagged(check_injectivity(strict).entry, "injectivity", i));
  if (s.wants("cone_lemma")) {
    for (double rho : s.cone_rhos) {
      const ConeReport c = check_cone_lemma(strict, gen, rho);
      char name[64];
      std::snprintf(name, sizeof name, "cone_lemma(rho=%g)", rho);
      CheckEntry e = make_entry(name, c.pass, std::min({c.a.margin, c.b1.margin, c.b2.margin}), i);
      e.params["rho"] = rho;
      e.params["s_rho"] = c.s_rho;
      e.params["tau_rho"] = c.tau_rho;
      e.params["margin_a"] = c.a.margin;
      e.params["margin_b1"] = c.b1.margin;
      e.params["margin_b2"] = c.b2.margin;
      for (const CheckEntry* sub : {&c.a, &c.b1, &c.b2})
        e.witnesses.insert(e.witnesses.end(), sub->witnesses.begin(), sub->witnesses.end());
      rep.entries.push_back(e);
    }
  }
  if (s.wants("calibrated_cones")) {
    const auto& c = s.calibrated;
    const auto r = check_calibrated_cones(h, u, strict, c.delta_target, c.r1, c.horizon);
    rep.entries.push_back(tagged(r.entry, "calibrated_cones", i));
    CalibratedConeOptions inv;
    inv.swap_gradients = true;
    const auto w = check_calibrated_cones(h, u, strict, c.delta_target, c.r1, c.horizon, inv);
    const bool detected = !w.entry.passed() && w.entry.margin < 0;
    CheckEntry e = make_entry("calibrated_cones_inverted", detected, -w.entry.margin, i,
                              "deliberately inverted cones must fail");
    e.params["inverted_margin"] = w.entry.margin;
    e.params["inverted_delta"] = w.delta_achieved;
    rep.entries.push_back(e);
  }
  if (s.wants("reparam") || s.wants("mechanical_identity")) {
    ReparamOptions ro;
    ro.match_tol_rel = s.match_tol_rel;
    const ReparamResult r = match_reparam(strict, gen, ro);
    if (s.wants("reparam")) {
      rep.entries.push_back(tagged(reparam_entry("reparam", r), "reparam", i));
      const double comp = composition_residual(r, match_reparam(gen, strict, ro));
      const double tol = 2 * s.match_tol_rel;
      CheckEntry e = make_entry("reparam_composition", comp < tol, tol - comp, i);
      e.params["composition_residual"] = comp;
      rep.entries.push_back(e);
    }
    if (s.wants("mechanical_identity")) {
      const bool mech = h.family() == HamiltonianFamily::mechanical;
      CheckEntry e = make_entry("mechanical_identity", mech && r.identity_deviation < s.identity_tol,
                                s.identity_tol - r.identity_deviation, i,
                                mech ? "" : "Hamiltonian is not of mechanical form");
      e.params["identity_deviation"] = r.identity_deviation;
      rep.entries.push_back(e);
    }
  }
  if (s.wants("perp")) rep.entries.push_back(perp_entry(s, gen, i));
  if (s.wants("strict_uniqueness")) {
    StrictUniquenessOptions so;
    so.eps_schedule = s.eps_schedule;
    so.extrapolation_tol = s.extrapolation_tol;
    so.min_order = s.min_order;
    so.mollified.moll_tol = s.moll_tol;
    const auto r = check_strict_uniqueness(h, u, x0, s.horizon, s.dt_ladder, so);
    rep.entries.push_back(tagged(r.entry, "strict_uniqueness", i));
    add_arc("mollified", r.mollified);
  }
  if (s.wants("intrinsic_oracle") && !intrinsic.points.empty()) {
    for (CheckEntry& e : intrinsic_entries(s, intrinsic, x0, i)) rep.entries.push_back(e);
  }
  if (s.wants("appendix_gap")) {
    const Vec2 v = initial_velocity(strict), p = strict.covectors.front();
    const AppendixGap g = appendix_gap(h, u, x0, v, p);
    CheckEntry e = make_entry("appendix_gap", g.p_bar_in_face && g.mu <= s.gap_tol,
                              s.gap_tol - g.mu, i, "gap along the strict selection");
    e.params["mu"] = g.mu;
    e.params["p_bar_in_face"] = g.p_bar_in_face;
    rep.entries.push_back(e);
  }
  if (s.wants("kdelta") && i == 0) {
    const KDeltaSettings& k = *s.kdelta;
    KDeltaOptions ko;
    ko.eps_schedule = s.eps_schedule;
    ko.dt = s.dt;
    try {
      const KDeltaResult r = check_kdelta_exclusion(h, u, k.x_bar, k.v_bar, k.p_bar, k.horizon, ko);
      CheckEntry e = tagged(r.entry, "kdelta", i);
      e.params["mu"] = r.gap.mu;
      e.params["c1"] = r.c1;
      e.params["delta"] = r.delta;
      rep.entries.push_back(e);
    } catch (const PreconditionError& ex) {
      rep.entries.push_back(make_entry("kdelta", false, -kInf, i, ex.what()));
    }
  }
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

bool RunReport::all_passed() const {
  return std::none_of(entries.begin(), entries.end(),
                      [](const CheckEntry& e) { return e.status == "fail"; });
}

int RunReport::exit_code() const { return assert_results && !all_passed() ? 1 : 0; }

const CheckEntry* RunReport::find(const std::string& name) const {
  for (const CheckEntry& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

Scenario with_overrides(const Scenario& s, std::optional<unsigned> seed,
                        std::optional<double> dt) {
  if (!seed && !dt) return s;
  json doc = s.config;
  if (seed) doc["seed"] = *seed;
  if (dt) doc["numerics"]["dt"] = *dt;
  return parse_scenario(doc.dump(2), s.source);
}

RunReport evaluate_scenario(const Scenario& s) {
  const auto t0 = std::chrono::steady_clock::now();
  RunReport rep;
  rep.scenario = s.name;
  rep.config = s.config;
  for (int i = 0; i < int(s.starts.size()); ++i) run_start(s, i, rep);
  if (s.wants("fixed_point"))
    for (CheckEntry& e : fixed_point_entries(s)) rep.entries.push_back(e);
  rep.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

RunReport run_scenario(const Scenario& s, const RunOptions& opt) {
  RunReport rep = evaluate_scenario(s);
  write_run(rep, opt);
  return rep;
}

void write_arc_csv(const std::filesystem::path& file, const SingularArc& arc) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error(file.string() + ": cannot write");
  out << "t,x1,x2,p1,p2,v1,v2,lambda,singular,omega\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = 0; k < arc.size(); ++k) {
    const Vec2 p = arc.has_covectors() ? arc.covectors[k] : Vec2{nan, nan};
    const double l = k < arc.lambdas.size() ? arc.lambdas[k] : nan;
    const double w = k < arc.omega.size() ? arc.omega[k] : nan;
    out << fmt(arc.times[k]) << ',' << fmt(arc.points[k].x1) << ',' << fmt(arc.points[k].x2)
        << ',' << fmt(p.x1) << ',' << fmt(p.x2) << ',' << fmt(arc.velocities[k].x1) << ','
        << fmt(arc.velocities[k].x2) << ',' << fmt(l) << ',' << (arc.singular[k] ? 1 : 0) << ','
        << fmt(w) << '\n';
  }
}

void write_arc_json(const std::filesystem::path& file, const SingularArc& arc) {
  json j;
  j["kind"] = arc_kind_name(arc.kind);
  j["truncated"] = arc.truncated;
  j["reason"] = arc.reason;
  json samples = json::array();
  for (std::size_t k = 0; k < arc.size(); ++k) {
    json s{{"t", arc.times[k]},
           {"x", {arc.points[k].x1, arc.points[k].x2}},
           {"v", {arc.velocities[k].x1, arc.velocities[k].x2}},
           {"singular", bool(arc.singular[k])}};
    if (arc.has_covectors()) s["p"] = {arc.covectors[k].x1, arc.covectors[k].x2};
    if (k < arc.lambdas.size()) s["lambda"] = finite_or_null(arc.lambdas[k]);
    if (k < arc.omega.size()) s["omega"] = finite_or_null(arc.omega[k]);
    samples.push_back(std::move(s));
  }
  j["samples"] = std::move(samples);
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error(file.string() + ": cannot write");
  out << j.dump(1) << '\n';
}

json entry_to_json(const CheckEntry& e) {
  json w = json::array();
  for (const Witness& x : e.witnesses)
    w.push_back({{"label", x.label}, {"s", finite_or_null(x.s)}, {"t", finite_or_null(x.t)},
                 {"value", finite_or_null(x.value)}});
  json p = json::object();
  for (const auto& [k, v] : e.params) p[k] = finite_or_null(v);
  json j{{"name", e.name}, {"status", e.status}, {"margin", finite_or_null(e.margin)},
         {"witnesses", w}, {"params", p}};
  if (!e.detail.empty()) j["detail"] = e.detail;
  return j;
}

json report_to_json(const RunReport& r) {
  json arcs = json::array();
  for (const ArcOutput& a : r.arcs)
    arcs.push_back({{"start", a.start},
                    {"kind", a.kind},
                    {"file", a.file.filename().string()},
                    {"samples", a.arc.size()},
                    {"truncated", a.arc.truncated},
                    {"reason", a.arc.reason}});
  json entries = json::array();
  int passed = 0, failed = 0, info = 0;
  for (const CheckEntry& e : r.entries) {
    entries.push_back(entry_to_json(e));
    (e.status == "pass" ? passed : e.status == "fail" ? failed : info)++;
  }
  return {{"scenario", r.scenario},
          {"toolkit_version", kToolkitVersion},
          {"wall_time_s", r.wall_time},
          {"arcs", arcs},
          {"entries", entries},
          {"summary",
           {{"passed", passed}, {"failed", failed}, {"informative", info},
            {"asserted", r.assert_results}, {"exit_code", r.exit_code()}}},
          {"config", r.config}};
}

void write_run(RunReport& report, const RunOptions& opt) {
  report.assert_results = opt.assert_results;
  report.dir = opt.out_root / report.scenario;
  std::filesystem::create_directories(report.dir);
  const char* ext = opt.format == ArcFormat::csv ? ".csv" : ".json";
  for (ArcOutput& a : report.arcs) {
    a.file = report.dir / ("arc-" + std::to_string(a.start) + "-" + a.kind + ext);
    if (opt.format == ArcFormat::csv) write_arc_csv(a.file, a.arc);
    else write_arc_json(a.file, a.arc);
  }
  std::ofstream out(report.dir / "report.json", std::ios::binary);
  if (!out) throw std::runtime_error((report.dir / "report.json").string() + ": cannot write");
  out << report_to_json(report).dump(2) << '\n';
}

std::string describe_scenario(const Scenario& s) {
  std::ostringstream os;
  os << s.name << "\n\n" << s.description << "\n";
  if (!s.exercises.empty()) {
    os << "\nExercises:\n";
    for (const std::string& e : s.exercises) os << "  - " << e << "\n";
  }
  os << "\nHamiltonian: " << s.h->description() << "\n";
  os << "Start points:";
  for (Vec2 x : s.starts) os << " (" << x.x1 << ", " << x.x2 << ")";
  os << "\nHorizon T = " << s.horizon << ", dt = " << s.dt << "\n";
  os << "Verifiers:";
  for (const std::string& v : s.verifiers) os << " " << v;
  if (s.verifiers.empty()) os << " (none)";
  os << "\n";
  if (s.expect_truncation) os << "Expected truncation: " << *s.expect_truncation << "\n";
  return os.str();
}

namespace {

SingularArc read_arc(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error(file.string() + ": cannot read arc");
  SingularArc arc;
  if (file.extension() == ".json") {
    const json j = json::parse(in);
    for (const json& s : j.at("samples")) {
      arc.times.push_back(s.at("t").get<double>());
      arc.points.push_back({s.at("x")[0].get<double>(), s.at("x")[1].get<double>()});
      arc.velocities.push_back({s.at("v")[0].get<double>(), s.at("v")[1].get<double>()});
      arc.singular.push_back(s.at("singular").get<bool>());
    }
    return arc;
  }
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<double> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(std::strtod(cell.c_str(), nullptr));
    if (f.size() < 10) throw std::runtime_error(file.string() + ": malformed arc row");
    arc.times.push_back(f[0]);
    arc.points.push_back({f[1], f[2]});
    arc.velocities.push_back({f[5], f[6]});
    arc.singular.push_back(f[8] != 0.0);
  }
  return arc;
}

void write_polyline(const std::filesystem::path& file, const std::vector<Vec2>& pts,
                    const std::vector<double>* params = nullptr) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error(file.string() + ": cannot write");
  out << (params ? "t,x1,x2\n" : "x1,x2\n");
  for (std::size_t k = 0; k < pts.size(); ++k) {
    if (params) out << fmt((*params)[k]) << ',';
    out << fmt(pts[k].x1) << ',' << fmt(pts[k].x2) << '\n';
  }
}

}  // namespace

PlotData emit_plotdata(const std::filesystem::path& run_dir, double s_plot) {
  const std::filesystem::path report_file = run_dir / "report.json";
  if (!std::filesystem::is_regular_file(report_file))
    throw std::runtime_error(run_dir.string() + ": no report.json, not a completed run");
  std::ifstream in(report_file, std::ios::binary);
  const json report = json::parse(in);
  const Scenario sc = parse_scenario(report.at("config").dump(2), report_file);

  const std::filesystem::path dir = run_dir / "plot";
  std::filesystem::create_directories(dir);
  PlotData pd;
  pd.s = s_plot;

  SingularArc strict;
  for (const json& a : report.at("arcs")) {
    if (a.at("start").get<int>() != 0) continue;
    const std::string kind = a.at("kind").get<std::string>();
    if (kind != "strict" && kind != "generalized" && kind != "intrinsic") continue;
    const SingularArc arc = read_arc(run_dir / a.at("file").get<std::string>());
    const auto file = dir / ("arc-" + kind + ".csv");
    write_polyline(file, arc.points, &arc.times);
    pd.arcs.push_back(file);
    if (kind == "strict") strict = arc;
  }
  if (strict.points.empty()) throw std::runtime_error(run_dir.string() + ": no strict arc in run");

  pd.apex = strict.at(s_plot);
  std::size_t k = 0;
  while (k + 1 < strict.size() && strict.times[k + 1] <= s_plot) ++k;
  pd.theta = normalized(strict.velocities[k]);
  pd.rho = sc.cone_rhos.front();
  const double len = sc.calibrated.r1;

  // Backward calibrated rays from the reachable gradients at x(s).
  const Superdiff2D d = sc.u->superdiff(pd.apex);
  int ray = 0;
  for (Vec2 p : d.reachable) {
    if (ray == 2) break;
    const FlowWithAction f = backward_calibrated(*sc.h, *sc.u, pd.apex, p, len, 1e-3);
    std::vector<Vec2> pts;
    for (const PhasePoint& q : f.states) pts.push_back(q.x);
    const auto file = dir / ("ray-" + std::to_string(++ray) + ".csv");
    write_polyline(file, pts, &f.times);
    pd.rays.push_back(file);
  }

  for (ConeSign sign : {ConeSign::plus, ConeSign::minus}) {
    const ConeSpec c = make_cone(pd.apex, pd.theta, pd.rho, sign);
    const auto [e1, e2] = cone_edge_directions(c);
    int side = 0;
    for (Vec2 e : {e1, e2}) {
      std::vector<Vec2> pts;
      for (int j = 0; j <= 20; ++j) pts.push_back(pd.apex + (len * j / 20.0) * e);
      const auto file = dir / (std::string("cone-") + (sign == ConeSign::plus ? "plus" : "minus") +
                               "-" + std::to_string(++side) + ".csv");
      write_polyline(file, pts);
      pd.cone_edges.push_back(file);
    }
  }
  return pd;
}

}  // namespace hjsing
