#pragma once

// Batch execution of a scenario: arcs, verifier entries and output files.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hjsing/scenario.hpp"
#include "hjsing/uniqueness.hpp"
#include "json.hpp"

namespace hjsing {

inline constexpr const char* kToolkitVersion = "1.0.0";

enum class ArcFormat { csv, json };

struct RunOptions {
  std::filesystem::path out_root = "out";  // the run goes to out_root / scenario name
  bool assert_results = true;              // exit 1 on failed verifiers
  ArcFormat format = ArcFormat::csv;
};

struct ArcOutput {
  int start = 0;
  std::string kind;  // strict, generalized, intrinsic or mollified
  std::filesystem::path file;
  SingularArc arc;
};

struct RunReport {
  std::string scenario;
  std::filesystem::path dir;
  std::vector<ArcOutput> arcs;
  std::vector<CheckEntry> entries;
  double wall_time = 0.0;
  nlohmann::json config;
  bool assert_results = true;

  bool all_passed() const;  // no entry with status "fail"
  int exit_code() const;    // 0 or 1
  const CheckEntry* find(const std::string& name) const;
};

// Re-parses the scenario with a new seed and/or step.
Scenario with_overrides(const Scenario& s, std::optional<unsigned> seed,
                        std::optional<double> dt);

// Computes everything without touching the file system.
RunReport evaluate_scenario(const Scenario& s);
// evaluate_scenario followed by write_run.
RunReport run_scenario(const Scenario& s, const RunOptions& opt = {});
void write_run(RunReport& report, const RunOptions& opt);

nlohmann::json report_to_json(const RunReport& r);
nlohmann::json entry_to_json(const CheckEntry& e);
void write_arc_csv(const std::filesystem::path& file, const SingularArc& arc);
void write_arc_json(const std::filesystem::path& file, const SingularArc& arc);

// One paragraph plus the exercised results and the verifier list.
std::string describe_scenario(const Scenario& s);

struct PlotData {
  std::vector<std::filesystem::path> arcs;
  std::vector<std::filesystem::path> rays;
  std::vector<std::filesystem::path> cone_edges;
  double s = 0.2;
  double rho = 0.0;
  Vec2 apex;
  Vec2 theta;  // unit axis of the forward cone
};

// Polylines for the arcs of the first start point, the two backward
// calibrated rays from x(s) and the edges of the cones C+ and C- at x(s).
// Throws std::runtime_error when `run_dir` holds no completed run.
PlotData emit_plotdata(const std::filesystem::path& run_dir, double s = 0.2);

}  // namespace hjsing
