// hjsing: scenario runner for singular characteristics.
//
// Exit codes: 0 all asserted verifiers pass, 1 a verifier failed,
// 2 usage or configuration error.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "hjsing/runner.hpp"
#include "hjsing/scenario.hpp"

namespace {

constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

std::filesystem::path default_out_root() {
  if (const char* env = std::getenv("HJSING_OUT_ROOT"); env && *env) return env;
  return "out";
}

int cmd_run(const std::string& target, const std::string& out, std::optional<unsigned> seed,
            std::optional<double> dt, bool assert_results, const std::string& format) {
  hjsing::Scenario s = hjsing::load_scenario(hjsing::resolve_scenario(target));
  s = hjsing::with_overrides(s, seed, dt);
  hjsing::RunOptions opt;
  opt.out_root = out.empty() ? default_out_root() : std::filesystem::path(out);
  opt.assert_results = assert_results;
  opt.format = format == "json" ? hjsing::ArcFormat::json : hjsing::ArcFormat::csv;
  const hjsing::RunReport r = hjsing::run_scenario(s, opt);

  for (const hjsing::CheckEntry& e : r.entries) {
    std::cout << (e.status == "pass" ? "PASS " : e.status == "fail" ? "FAIL " : "INFO ")
              << e.name;
    if (auto it = e.params.find("start"); it != e.params.end() && it->second >= 0)
      std::cout << " [start " << it->second << "]";
    std::cout << "  margin=" << e.margin;
    if (!e.detail.empty()) std::cout << "  (" << e.detail << ")";
    std::cout << "\n";
  }
  for (const hjsing::ArcOutput& a : r.arcs)
    if (a.arc.truncated)
      std::cout << "note: " << a.kind << " arc from start " << a.start << " truncated: "
                << a.arc.reason << "\n";
  std::cout << "report: " << (r.dir / "report.json").string() << "\n";
  return r.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Singular characteristics of Hamilton-Jacobi equations: scenario runner"};
  app.require_subcommand(1);
  app.set_version_flag("--version", hjsing::kToolkitVersion);

  std::string target, out, format = "csv", run_dir;
  std::optional<unsigned> seed;
  std::optional<double> dt;
  bool assert_results = true;
  double plot_s = 0.2;

  CLI::App* run = app.add_subcommand("run", "run a bundled scenario or a scenario file");
  run->add_option("scenario", target, "scenario name or path")->required();
  run->add_option("--out", out, "output root (default $HJSING_OUT_ROOT or ./out)");
  run->add_option("--seed", seed, "override the scenario seed");
  run->add_option("--dt", dt, "override the step size")->check(CLI::PositiveNumber);
  run->add_flag("--assert,!--no-assert", assert_results,
                "exit 1 when a verifier fails (default on)");
  run->add_option("--format", format, "arc file format")->check(CLI::IsMember({"csv", "json"}));

  CLI::App* list = app.add_subcommand("list", "list bundled scenarios");
  CLI::App* describe = app.add_subcommand("describe", "describe a bundled scenario");
  describe->add_option("scenario", target, "scenario name or path")->required();

  CLI::App* plot = app.add_subcommand("emit-plotdata", "write plottable polylines for a run");
  plot->add_option("run_dir", run_dir, "directory of a completed run")->required();
  plot->add_option("--s", plot_s, "arc time of the cones and rays")->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*run) return cmd_run(target, out, seed, dt, assert_results, format);
    if (*list) {
      for (const std::string& name : hjsing::list_scenarios()) {
        const hjsing::Scenario s = hjsing::load_scenario(hjsing::resolve_scenario(name));
        std::string first = s.description.substr(0, s.description.find(". ") + 1);
        std::cout << name << "\t" << first << "\n";
      }
      return 0;
    }
    if (*describe) {
      std::cout << hjsing::describe_scenario(
          hjsing::load_scenario(hjsing::resolve_scenario(target)));
      return 0;
    }
    if (*plot) {
      const hjsing::PlotData pd = hjsing::emit_plotdata(run_dir, plot_s);
      for (const auto* group : {&pd.arcs, &pd.rays, &pd.cone_edges})
        for (const auto& f : *group) std::cout << f.string() << "\n";
      return 0;
    }
  } catch (const hjsing::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
