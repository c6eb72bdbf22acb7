#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "hjsing/geometry2d.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result cli(const std::string& args) {
  const std::string cmd = std::string(HJSING_CLI) + " " + args + " 2>&1";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof buf, p)) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& f) {
  std::ifstream in(f, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("hjsing_cli_" + name);
  fs::remove_all(d);
  return d;
}

std::vector<hjsing::Vec2> read_polyline(const fs::path& f) {
  std::ifstream in(f);
  std::string line;
  std::getline(in, line);
  std::vector<hjsing::Vec2> pts;
  while (std::getline(in, line)) {
    // x1, x2 are the last two columns.
    const auto c2 = line.rfind(','), c1 = line.rfind(',', c2 - 1);
    const std::size_t b = c1 == std::string::npos ? 0 : c1 + 1;
    pts.push_back({std::stod(line.substr(b, c2 - b)), std::stod(line.substr(c2 + 1))});
  }
  return pts;
}

}  // namespace

TEST_CASE("list and describe") {
  const Result l = cli("list");
  CHECK(l.code == 0);
  int lines = 0;
  for (char c : l.out) lines += c == '\n';
  CHECK(lines >= 5);
  for (const char* n : {"corner-eikonal", "anisotropic-corner", "triple-junction",
                        "mechanical-valley", "drift-quadratic"})
    CHECK(l.out.find(n) != std::string::npos);

  const Result d = cli("describe mechanical-valley");
  CHECK(d.code == 0);
  CHECK(d.out.find("identity corollary") != std::string::npos);
  CHECK(cli("describe no-such-thing").code == 2);
}

TEST_CASE("usage and configuration errors exit with 2") {
  CHECK(cli("").code == 2);
  CHECK(cli("run").code == 2);
  CHECK(cli("run /nonexistent/scenario.json").code == 2);
  CHECK(cli("run corner-eikonal --format xml").code == 2);
  const fs::path d = scratch("bad");
  fs::create_directories(d);
  std::ofstream(d / "bad.json") << "{\n  \"schema_version\": 1,\n  \"name\": \"bad\",\n"
                                   "  \"horizon\": \"long\"\n}\n";
  const Result r = cli("run " + (d / "bad.json").string() + " --out " + d.string());
  CHECK(r.code == 2);
  CHECK(r.out.find(":4:") != std::string::npos);
  CHECK(r.out.find("/horizon") != std::string::npos);
}

TEST_CASE("critical start exits with 1 and names the hypothesis") {
  const fs::path d = scratch("critical");
  const Result r = cli("run critical-junction --out " + d.string());
  CHECK(r.code == 1);
  CHECK(r.out.find("0 \xE2\x88\x89 co H_p") != std::string::npos);
  const auto report = nlohmann::json::parse(slurp(d / "critical-junction" / "report.json"));
  CHECK(report["entries"][0]["name"] == "precondition");
  CHECK(report["summary"]["exit_code"] == 1);
  CHECK(cli("run critical-junction --no-assert --out " + d.string()).code == 0);
}

TEST_CASE("triple junction truncates with reason junction") {
  const fs::path d = scratch("triple");
  const Result r = cli("run triple-junction --out " + d.string());
  CHECK(r.code == 0);
  const auto report = nlohmann::json::parse(slurp(d / "triple-junction" / "report.json"));
  bool found = false;
  for (const auto& a : report["arcs"])
    if (a["kind"] == "generalized") {
      found = true;
      CHECK(a["truncated"] == true);
      CHECK(a["reason"] == "junction");
    }
  CHECK(found);
}

TEST_CASE("runs are deterministic") {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  REQUIRE(cli("run anisotropic-corner --out " + a.string()).code == 0);
  REQUIRE(cli("run anisotropic-corner --out " + b.string()).code == 0);
  int files = 0;
  for (const auto& e : fs::directory_iterator(a / "anisotropic-corner")) {
    if (e.path().extension() != ".csv") continue;
    ++files;
    CHECK(slurp(e.path()) == slurp(b / "anisotropic-corner" / e.path().filename()));
  }
  CHECK(files >= 3);
}

TEST_CASE("seed, step and format flags") {
  const fs::path d = scratch("flags");
  REQUIRE(cli("run drift-quadratic --seed 9 --dt 2e-3 --format json --out " + d.string()).code ==
          0);
  const auto report = nlohmann::json::parse(slurp(d / "drift-quadratic" / "report.json"));
  CHECK(report["config"]["seed"] == 9);
  CHECK(report["config"]["numerics"]["dt"] == 2e-3);
  const auto arc = nlohmann::json::parse(slurp(d / "drift-quadratic" / "arc-0-strict.json"));
  CHECK(arc["samples"].size() == 501);
}

TEST_CASE("output root from the environment") {
  const fs::path d = scratch("env");
  const std::string cmd = "HJSING_OUT_ROOT=" + d.string() + " " + std::string(HJSING_CLI) +
                          " run triple-junction > /dev/null 2>&1";
  CHECK(std::system(cmd.c_str()) == 0);
  CHECK(fs::is_regular_file(d / "triple-junction" / "report.json"));
}

TEST_CASE("plot data for the corner") {
  const fs::path d = scratch("plot");
  REQUIRE(cli("run corner-eikonal --out " + d.string()).code == 0);
  const fs::path run = d / "corner-eikonal";
  const Result r = cli("emit-plotdata " + run.string());
  REQUIRE(r.code == 0);
  int arcs = 0, rays = 0, cones = 0;
  for (const auto& e : fs::directory_iterator(run / "plot")) {
    const std::string n = e.path().filename().string();
    arcs += n.rfind("arc-", 0) == 0;
    rays += n.rfind("ray-", 0) == 0;
    cones += n.rfind("cone-", 0) == 0;
  }
  CHECK(arcs == 3);
  CHECK(rays == 2);
  CHECK(cones == 4);

  // x(0.2) = (1.1, 1.1), axis (1, 1)/sqrt 2, rho = 0.6.
  const hjsing::Vec2 apex{1.1, 1.1};
  const hjsing::Vec2 axis = hjsing::normalized(hjsing::Vec2{1, 1});
  for (const char* sign : {"plus", "minus"}) {
    for (int side : {1, 2}) {
      const auto pts = read_polyline(run / "plot" / ("cone-" + std::string(sign) + "-" +
                                                     std::to_string(side) + ".csv"));
      REQUIRE(pts.size() > 2);
      CHECK(hjsing::distance(pts.front(), apex) < 1e-9);
      const double s = std::string(sign) == "plus" ? 1.0 : -1.0;
      for (const auto& y : pts) {
        const hjsing::Vec2 w = y - apex;
        CHECK(s * hjsing::dot(w, axis) - 0.6 * hjsing::norm(w) >= -1e-12);
        CHECK(s * hjsing::dot(w, axis) - 0.6 * hjsing::norm(w) <= 1e-12);
      }
    }
  }
  // Rays follow the branch gradients backward from x(0.2).
  const auto r1 = read_polyline(run / "plot" / "ray-1.csv");
  const auto r2 = read_polyline(run / "plot" / "ray-2.csv");
  CHECK(hjsing::distance(r1.front(), apex) < 1e-9);
  CHECK(hjsing::distance(r2.front(), apex) < 1e-9);
  const hjsing::Vec2 e1 = r1.back() - apex, e2 = r2.back() - apex;
  CHECK(std::abs(e1.x1 * e2.x1 + e1.x2 * e2.x2) < 1e-9);  // along -(1,0) and -(0,1)

  const fs::path empty = scratch("plot_empty");
  fs::create_directories(empty);
  CHECK(cli("emit-plotdata " + empty.string()).code == 2);
}
