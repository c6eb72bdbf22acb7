#include "hjsing/scenario.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "hjsing/errors.hpp"
#include "hjsing/expression.hpp"

#ifndef HJSING_SCENARIO_DIR
#define HJSING_SCENARIO_DIR "scenarios"
#endif

namespace hjsing {

namespace {

using nlohmann::json;

std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + offset, '\n'));
}

// Best-effort line of a JSON pointer: walks the pointer's object keys through
// the text, each search starting where the previous key was found.
std::size_t line_of_pointer(const std::string& text, const std::string& pointer) {
  std::size_t pos = 0;
  std::size_t found = std::string::npos;
  std::stringstream ss(pointer);
  std::string token;
  while (std::getline(ss, token, '/')) {
    if (token.empty() || std::all_of(token.begin(), token.end(), ::isdigit)) continue;
    const std::size_t at = text.find("\"" + token + "\"", pos);
    if (at == std::string::npos) break;
    found = at;
    pos = at + token.size() + 2;
  }
  return found == std::string::npos ? 0 : line_of_offset(text, found);
}

class Reader {
 public:
  Reader(const std::string& text, const std::filesystem::path& source)
      : text_(text), source_(source) {}

  [[noreturn]] void fail(const std::string& pointer, const std::string& msg) const {
    const std::size_t line = line_of_pointer(text_, pointer);
    std::ostringstream os;
    if (!source_.empty()) os << source_.string() << ":";
    if (line > 0) os << line << ": ";
    else if (!source_.empty()) os << " ";
    os << (pointer.empty() ? "/" : pointer) << ": " << msg;
    throw ConfigError(os.str(), pointer, line);
  }

  const json& at(const json& obj, const std::string& ptr, const std::string& key) const {
    if (!obj.contains(key)) fail(ptr + "/" + key, "required field missing");
    return obj.at(key);
  }

  double number(const json& j, const std::string& ptr) const {
    if (!j.is_number()) fail(ptr, "expected a number");
    return j.get<double>();
  }

  double positive(const json& j, const std::string& ptr) const {
    const double v = number(j, ptr);
    if (!(v > 0.0)) fail(ptr, "must be positive");
    return v;
  }

  std::string string(const json& j, const std::string& ptr) const {
    if (!j.is_string()) fail(ptr, "expected a string");
    return j.get<std::string>();
  }

  Vec2 vec2(const json& j, const std::string& ptr) const {
    if (!j.is_array() || j.size() != 2) fail(ptr, "expected an array of two numbers");
    return {number(j[0], ptr + "/0"), number(j[1], ptr + "/1")};
  }

  Box2 box(const json& j, const std::string& ptr) const {
    if (!j.is_object()) fail(ptr, "expected {\"lo\": [..], \"hi\": [..]}");
    Box2 b{vec2(at(j, ptr, "lo"), ptr + "/lo"), vec2(at(j, ptr, "hi"), ptr + "/hi")};
    if (!(b.lo.x1 < b.hi.x1 && b.lo.x2 < b.hi.x2)) fail(ptr, "empty region");
    return b;
  }

  std::vector<double> positives(const json& j, const std::string& ptr) const {
    if (!j.is_array() || j.empty()) fail(ptr, "expected a non-empty array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i)
      out.push_back(positive(j[i], ptr + "/" + std::to_string(i)));
    return out;
  }

  Expression position_expr(const json& j, const std::string& ptr) const {
    if (j.is_number()) return Expression(j.get<double>());
    try {
      return Expression::parse(string(j, ptr), Expression::kPositionVars);
    } catch (const ExpressionError& e) {
      fail(ptr, std::string("bad expression: ") + e.what());
    }
  }

  Branch branch(const json& j, const std::string& ptr) const {
    try {
      return branch_from_expression(string(j, ptr));
    } catch (const ExpressionError& e) {
      fail(ptr, std::string("bad expression: ") + e.what());
    }
  }

 private:
  const std::string& text_;
  std::filesystem::path source_;
};

double eval_x(const Expression& e, Vec2 x) { return e.eval({x.x1, x.x2, 0.0, 0.0}); }

Hamiltonian build_hamiltonian(const Reader& r, const json& j, const Box2& region) {
  const std::string ptr = "/hamiltonian";
  if (!j.is_object()) r.fail(ptr, "expected an object");
  const std::string family = r.string(r.at(j, ptr, "family"), ptr + "/family");
  try {
    if (family == "mechanical") {
      const json& ja = r.at(j, ptr, "A");
      if (!ja.is_array() || ja.size() != 2 || !ja[0].is_array() || !ja[1].is_array() ||
          ja[0].size() != 2 || ja[1].size() != 2)
        r.fail(ptr + "/A", "expected a 2x2 array");
      std::array<Expression, 4> a;
      for (int i = 0; i < 2; ++i)
        for (int k = 0; k < 2; ++k)
          a[2 * i + k] = r.position_expr(ja[i][k], ptr + "/A/" + std::to_string(i) + "/" +
                                                       std::to_string(k));
      const Expression v = r.position_expr(r.at(j, ptr, "V"), ptr + "/V");
      MechanicalSpec spec;
      spec.region = region;
      spec.constant_a = std::all_of(a.begin(), a.end(), [](const Expression& e) {
        return e.is_constant();
      });
      spec.constant_v = v.is_constant();
      spec.a = [a](Vec2 x) {
        return Mat2{eval_x(a[0], x), eval_x(a[1], x), eval_x(a[2], x), eval_x(a[3], x)};
      };
      spec.v = [v](Vec2 x) { return eval_x(v, x); };
      std::array<MatrixField, 2> da;
      for (int d = 0; d < 2; ++d) {
        std::array<Expression, 4> ad;
        for (int i = 0; i < 4; ++i) ad[i] = a[i].derivative(d == 0 ? Var::x1 : Var::x2);
        da[d] = [ad](Vec2 x) {
          return Mat2{eval_x(ad[0], x), eval_x(ad[1], x), eval_x(ad[2], x), eval_x(ad[3], x)};
        };
      }
      spec.da = da;
      const Expression v1 = v.derivative(Var::x1), v2 = v.derivative(Var::x2);
      spec.dv = [v1, v2](Vec2 x) { return Vec2{eval_x(v1, x), eval_x(v2, x)}; };
      return make_mechanical(std::move(spec));
    }
    if (family == "quadratic_form") {
      const json& ja = r.at(j, ptr, "A");
      if (!ja.is_array() || ja.size() != 2) r.fail(ptr + "/A", "expected a 2x2 array");
      const Vec2 row0 = r.vec2(ja[0], ptr + "/A/0"), row1 = r.vec2(ja[1], ptr + "/A/1");
      const Vec2 b = j.contains("b") ? r.vec2(j["b"], ptr + "/b") : Vec2{0, 0};
      const double c = j.contains("c") ? r.number(j["c"], ptr + "/c") : 0.0;
      return make_quadratic_form(Mat2{row0.x1, row0.x2, row1.x1, row1.x2}, b, c);
    }
    if (family == "custom") {
      const std::string text = r.string(r.at(j, ptr, "expression"), ptr + "/expression");
      const double bound =
          j.contains("momentum_bound") ? r.positive(j["momentum_bound"], ptr + "/momentum_bound")
                                       : 4.0;
      try {
        return make_custom_expression(text, region, bound);
      } catch (const ExpressionError& e) {
        r.fail(ptr + "/expression", std::string("bad expression: ") + e.what());
      }
    }
  } catch (const PreconditionError& e) {
    r.fail(ptr, e.what());
  }
  r.fail(ptr + "/family", "unknown family '" + family +
                              "' (expected mechanical, quadratic_form or custom)");
}

std::shared_ptr<const SolutionRep> build_solution(const Reader& r, const json& j,
                                                  const Hamiltonian& h, const Box2& region,
                                                  unsigned seed, int grid_resolution) {
  const std::string ptr = "/solution";
  if (!j.is_object()) r.fail(ptr, "expected an object");
  const std::string kind = r.string(r.at(j, ptr, "kind"), ptr + "/kind");
  if (kind == "min_of_smooth") {
    const json& jb = r.at(j, ptr, "branches");
    if (!jb.is_array() || jb.empty()) r.fail(ptr + "/branches", "expected a non-empty array");
    std::vector<Branch> branches;
    for (std::size_t i = 0; i < jb.size(); ++i)
      branches.push_back(r.branch(jb[i], ptr + "/branches/" + std::to_string(i)));
    std::optional<double> c;
    if (j.contains("semiconcavity")) c = r.positive(j["semiconcavity"], ptr + "/semiconcavity");
    try {
      return std::make_shared<MinOfSmooth>(std::move(branches), region, c);
    } catch (const PreconditionError& e) {
      r.fail(ptr, e.what());
    }
  }
  if (kind == "lax_oleinik") {
    // u0 is the minimum of the listed branches.
    const json& jb = r.at(j, ptr, "u0_branches");
    if (!jb.is_array() || jb.empty()) r.fail(ptr + "/u0_branches", "expected a non-empty array");
    std::vector<Branch> branches;
    for (std::size_t i = 0; i < jb.size(); ++i)
      branches.push_back(r.branch(jb[i], ptr + "/u0_branches/" + std::to_string(i)));
    ScalarField u0 = [branches](Vec2 x) {
      double m = branches.front().value(x);
      for (const Branch& b : branches) m = std::min(m, b.value(x));
      return m;
    };
    const double t = r.positive(r.at(j, ptr, "t"), ptr + "/t");
    const double lambda = j.contains("lambda") ? r.positive(j["lambda"], ptr + "/lambda") : 2.0;
    const double c = r.positive(r.at(j, ptr, "semiconcavity"), ptr + "/semiconcavity");
    LaxOleinikOptions opt;
    opt.grid_resolution = grid_resolution;
    return std::make_shared<LaxOleinikValue>(h, std::move(u0), t, region, lambda, c, seed, opt);
  }
  r.fail(ptr + "/kind", "unknown kind '" + kind + "' (expected min_of_smooth or lax_oleinik)");
}

}  // namespace

bool Scenario::wants(const std::string& verifier) const {
  return std::find(verifiers.begin(), verifiers.end(), verifier) != verifiers.end();
}

Scenario parse_scenario(const std::string& text, const std::filesystem::path& source) {
  Reader r(text, source);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t line = line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0);
    std::ostringstream os;
    if (!source.empty()) os << source.string() << ":";
    os << line << ": malformed JSON: " << e.what();
    throw ConfigError(os.str(), "", line);
  }
  if (!doc.is_object()) r.fail("", "expected a JSON object");

  const double version = r.number(r.at(doc, "", "schema_version"), "/schema_version");
  if (version != kScenarioSchemaVersion)
    r.fail("/schema_version", "unsupported schema version (expected " +
                                  std::to_string(kScenarioSchemaVersion) + ")");

  Scenario s;
  s.source = source;
  s.config = doc;
  s.name = r.string(r.at(doc, "", "name"), "/name");
  if (doc.contains("description")) s.description = r.string(doc["description"], "/description");
  if (doc.contains("exercises")) {
    const json& je = doc["exercises"];
    if (!je.is_array()) r.fail("/exercises", "expected an array of strings");
    for (std::size_t i = 0; i < je.size(); ++i)
      s.exercises.push_back(r.string(je[i], "/exercises/" + std::to_string(i)));
  }
  if (doc.contains("seed")) {
    const json& js = doc["seed"];
    if (!js.is_number_unsigned()) r.fail("/seed", "expected a non-negative integer");
    s.seed = js.get<unsigned>();
  }
  s.horizon = r.positive(r.at(doc, "", "horizon"), "/horizon");
  if (doc.contains("t0")) s.t0 = r.positive(doc["t0"], "/t0");

  if (doc.contains("numerics")) {
    const json& jn = doc["numerics"];
    const std::string p = "/numerics";
    if (!jn.is_object()) r.fail(p, "expected an object");
    for (auto it = jn.begin(); it != jn.end(); ++it) {
      const std::string key = it.key(), kp = p + "/" + key;
      if (key == "dt") s.dt = r.positive(*it, kp);
      else if (key == "dt_ladder") s.dt_ladder = r.positives(*it, kp);
      else if (key == "eps_schedule") s.eps_schedule = r.positives(*it, kp);
      else if (key == "intrinsic_grid") s.intrinsic_grid = r.positives(*it, kp);
      else if (key == "lambda") s.lambda = r.positive(*it, kp);
      else if (key == "grid_resolution") {
        if (!it->is_number_integer() || it->get<int>() < 4) r.fail(kp, "expected an integer >= 4");
        s.grid_resolution = it->get<int>();
      } else r.fail(kp, "unknown numerics field");
    }
    if (s.dt_ladder.size() < 2) r.fail(p + "/dt_ladder", "needs at least two step sizes");
  }
  if (doc.contains("tolerances")) {
    const json& jt = doc["tolerances"];
    const std::string p = "/tolerances";
    if (!jt.is_object()) r.fail(p, "expected an object");
    const std::map<std::string, double*> fields{
        {"moll_tol", &s.moll_tol},         {"match_tol_rel", &s.match_tol_rel},
        {"extrapolation_tol", &s.extrapolation_tol}, {"energy_tol", &s.energy_tol},
        {"perp_tol", &s.perp_tol},         {"fixed_point_tol", &s.fixed_point_tol},
        {"identity_tol", &s.identity_tol}, {"gap_tol", &s.gap_tol},
        {"min_order", &s.min_order}};
    for (auto it = jt.begin(); it != jt.end(); ++it) {
      const auto f = fields.find(it.key());
      if (f == fields.end()) r.fail(p + "/" + it.key(), "unknown tolerance");
      *f->second = r.positive(*it, p + "/" + it.key());
    }
  }

  const Box2 region = r.box(r.at(r.at(doc, "", "solution"), "/solution", "region"),
                            "/solution/region");
  s.h = std::make_shared<const Hamiltonian>(build_hamiltonian(r, r.at(doc, "", "hamiltonian"), region));
  s.u = build_solution(r, doc["solution"], *s.h, region, s.seed, s.grid_resolution);

  const json& jst = r.at(doc, "", "starts");
  if (!jst.is_array() || jst.empty()) r.fail("/starts", "expected a non-empty array of points");
  for (std::size_t i = 0; i < jst.size(); ++i) {
    const std::string p = "/starts/" + std::to_string(i);
    const Vec2 x = r.vec2(jst[i], p);
    if (!region.contains(x, 0.0)) r.fail(p, "start point outside the solution region");
    s.starts.push_back(x);
  }

  const json& jv = r.at(doc, "", "verifiers");
  if (!jv.is_array()) r.fail("/verifiers", "expected an array of verifier names");
  for (std::size_t i = 0; i < jv.size(); ++i) {
    const std::string p = "/verifiers/" + std::to_string(i);
    const std::string v = r.string(jv[i], p);
    const auto& known = known_verifiers();
    if (std::find(known.begin(), known.end(), v) == known.end())
      r.fail(p, "unknown verifier '" + v + "'");
    s.verifiers.push_back(v);
  }

  if (doc.contains("verifier_params")) {
    const json& jp = doc["verifier_params"];
    const std::string p = "/verifier_params";
    if (!jp.is_object()) r.fail(p, "expected an object");
    for (auto it = jp.begin(); it != jp.end(); ++it) {
      const std::string key = it.key(), kp = p + "/" + key;
      const json& j = *it;
      if (key == "cone_rhos") {
        s.cone_rhos = r.positives(j, kp);
        for (std::size_t i = 0; i < s.cone_rhos.size(); ++i)
          if (s.cone_rhos[i] >= 1.0) r.fail(kp + "/" + std::to_string(i), "rho must lie in (0, 1)");
      } else if (key == "calibrated") {
        if (!j.is_object()) r.fail(kp, "expected an object");
        if (j.contains("delta_target"))
          s.calibrated.delta_target = r.positive(j["delta_target"], kp + "/delta_target");
        if (j.contains("r1")) s.calibrated.r1 = r.positive(j["r1"], kp + "/r1");
        if (j.contains("horizon")) s.calibrated.horizon = r.positive(j["horizon"], kp + "/horizon");
      } else if (key == "kdelta") {
        if (!j.is_object()) r.fail(kp, "expected an object");
        KDeltaSettings k;
        k.x_bar = j.contains("x_bar") ? r.vec2(j["x_bar"], kp + "/x_bar") : s.starts.front();
        k.v_bar = r.vec2(r.at(j, kp, "v_bar"), kp + "/v_bar");
        k.p_bar = r.vec2(r.at(j, kp, "p_bar"), kp + "/p_bar");
        k.horizon = j.contains("horizon") ? r.positive(j["horizon"], kp + "/horizon") : s.horizon;
        s.kdelta = k;
      } else if (key == "fixed_point") {
        if (!j.is_object()) r.fail(kp, "expected an object");
        if (j.contains("times")) s.fixed_point_times = r.positives(j["times"], kp + "/times");
        if (j.contains("samples")) {
          if (!j["samples"].is_number_integer() || j["samples"].get<int>() < 1)
            r.fail(kp + "/samples", "expected a positive integer");
          s.fixed_point_samples = j["samples"].get<int>();
        }
      } else {
        r.fail(kp, "unknown verifier parameter");
      }
    }
  }
  if (s.wants("kdelta") && !s.kdelta)
    r.fail("/verifier_params/kdelta", "required when the kdelta verifier is selected");
  if (s.wants("intrinsic_oracle") && s.intrinsic_grid.empty())
    r.fail("/numerics/intrinsic_grid", "required when the intrinsic_oracle verifier is selected");
  if (s.wants("fixed_point") && s.u->kind() != SolutionKind::min_of_smooth)
    r.fail("/verifiers", "fixed_point needs a min_of_smooth solution");

  if (doc.contains("expect")) {
    const json& je = doc["expect"];
    if (!je.is_object()) r.fail("/expect", "expected an object");
    for (auto it = je.begin(); it != je.end(); ++it) {
      if (it.key() != "truncation") r.fail("/expect/" + it.key(), "unknown expectation");
      s.expect_truncation = r.string(*it, "/expect/truncation");
    }
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot read scenario file", "", 0);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path);
}

std::filesystem::path scenario_dir() {
  if (const char* env = std::getenv("HJSING_SCENARIO_DIR"); env && *env) return env;
  return HJSING_SCENARIO_DIR;
}

std::vector<std::string> list_scenarios(const std::filesystem::path& dir) {
  std::vector<std::string> names;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (entry.path().extension() == ".json") names.push_back(entry.path().stem().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

std::filesystem::path resolve_scenario(const std::string& name_or_path,
                                       const std::filesystem::path& dir) {
  const std::filesystem::path p(name_or_path);
  if (p.has_extension() || p.has_parent_path()) {
    if (!std::filesystem::is_regular_file(p))
      throw ConfigError(name_or_path + ": no such scenario file", "", 0);
    return p;
  }
  const std::filesystem::path bundled = dir / (name_or_path + ".json");
  if (!std::filesystem::is_regular_file(bundled))
    throw ConfigError("unknown scenario '" + name_or_path + "'", "", 0);
  return bundled;
}

}  // namespace hjsing
