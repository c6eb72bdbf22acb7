#pragma once

// Scenario files: a Hamiltonian, a solution, start points and the numeric
// and verifier settings of a run.

#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hjsing/hamiltonian.hpp"
#include "hjsing/solution.hpp"
#include "json.hpp"

namespace hjsing {

inline constexpr int kScenarioSchemaVersion = 1;

// Schema or parse failure. `pointer` is a JSON pointer into the document,
// `line` is 1-based (0 when unknown).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, std::string pointer, std::size_t line)
      : std::runtime_error(what), pointer_(std::move(pointer)), line_(line) {}
  const std::string& pointer() const { return pointer_; }
  std::size_t line() const { return line_; }

 private:
  std::string pointer_;
  std::size_t line_;
};

struct CalibratedSettings {
  double delta_target = 0.1;
  double r1 = 0.3;
  double horizon = 0.5;
};

struct KDeltaSettings {
  Vec2 x_bar;
  Vec2 v_bar;
  Vec2 p_bar;
  double horizon = 1.0;
};

struct Scenario {
  std::string name;
  std::string description;
  std::vector<std::string> exercises;
  std::filesystem::path source;
  nlohmann::json config;  // the parsed document, echoed into reports

  std::shared_ptr<const Hamiltonian> h;
  std::shared_ptr<const SolutionRep> u;

  std::vector<Vec2> starts;
  double horizon = 1.0;  // T
  double t0 = 0.1;       // local horizon of the sup Lax-Oleinik evolution
  unsigned seed = 1;

  double dt = 1e-3;
  std::vector<double> dt_ladder{4e-3, 2e-3, 1e-3};
  std::vector<double> eps_schedule{1e-2, 1e-3, 1e-4};
  std::vector<double> intrinsic_grid;
  double lambda = 2.0;
  int grid_resolution = 64;

  double moll_tol = 1e-4;
  double match_tol_rel = 1e-4;
  double extrapolation_tol = 1e-6;
  double min_order = 1.0;
  double energy_tol = 1e-8;
  double perp_tol = 1e-6;
  double fixed_point_tol = 1e-3;
  double identity_tol = 1e-5;
  double gap_tol = 1e-8;

  std::vector<std::string> verifiers;
  std::vector<double> cone_rhos{0.6, 0.9};
  CalibratedSettings calibrated;
  std::optional<KDeltaSettings> kdelta;
  std::vector<double> fixed_point_times{0.1, 0.5};
  int fixed_point_samples = 50;
  std::optional<std::string> expect_truncation;  // generalized arcs must stop for this reason

  bool wants(const std::string& verifier) const;
};

// Parses a scenario document. `source` is used in messages only.
Scenario parse_scenario(const std::string& text, const std::filesystem::path& source = {});
Scenario load_scenario(const std::filesystem::path& path);

// Bundled scenarios: $HJSING_SCENARIO_DIR when set, else the directory
// compiled in at build time.
std::filesystem::path scenario_dir();
std::vector<std::string> list_scenarios(const std::filesystem::path& dir = scenario_dir());
// A bundled name or a path to a file.
std::filesystem::path resolve_scenario(const std::string& name_or_path,
                                       const std::filesystem::path& dir = scenario_dir());

inline const std::vector<std::string>& known_verifiers() {
  static const std::vector<std::string> v{
      "energy",         "lip0",         "injectivity",      "cone_lemma",
      "calibrated_cones", "reparam",    "perp",             "strict_uniqueness",
      "mechanical_identity", "intrinsic_oracle", "fixed_point", "appendix_gap",
      "kdelta"};
  return v;
}

}  // namespace hjsing
