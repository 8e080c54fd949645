#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "svlv/harness.hpp"

using namespace svlv;
namespace fs = std::filesystem;

namespace {

json small_config() {
  return json::parse(R"({
    "name": "small",
    "model": {
      "type": "lv",
      "kernel": {"d": 2, "variant": "nearest_neighbor"},
      "theta0": 1, "theta1": 1,
      "N": [10, 20],
      "initial": {"kind": "box", "lo": [0, 0], "hi": [2, 2]}
    },
    "run": {"horizon": 0.2, "replicas": 5, "seed": 4, "grid_points": 2},
    "analysis": {"test_functions": [{"kind": "gaussian", "center": [0, 0], "width": 0.5}]}
  })");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("svlv_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("config parsing and validation") {
  const auto c = parse_config(small_config());
  CHECK(c.model.N.size() == 2);
  CHECK(c.model.kernels.size() == 2);
  CHECK(c.run.replicas == 5);
  auto bad = small_config();
  bad["model"]["N"] = {20, 10};
  CHECK_THROWS_AS(parse_config(bad), ConfigError);
  bad = small_config();
  bad["model"]["type"] = "unknown";
  CHECK_THROWS_AS(parse_config(bad), ConfigError);
  bad = small_config();
  bad["model"].erase("initial");
  CHECK_THROWS_AS(parse_config(bad), ConfigError);
  bad = small_config();
  bad["analysis"]["test_functions"][0]["width"] = -1;
  CHECK_THROWS(parse_config(bad));
  bad = small_config();
  bad["run"]["engine"] = "warp";
  CHECK_THROWS_AS(parse_config(bad), ConfigError);
}

TEST_CASE("long-range range schedule") {
  auto j = small_config();
  j["model"]["kernel"] = {{"d", 2}, {"variant", "long_range"}, {"M_N", {2, 3}}};
  const auto c = parse_config(j);
  CHECK(c.model.kernel_at(0).range() == 2);
  CHECK(c.model.kernel_at(1).range() == 3);
  j["model"]["kernel"]["M_N"] = {2, 3, 4};
  CHECK_THROWS_AS(parse_config(j), ConfigError);
}

TEST_CASE("test function json round trip") {
  const json f = {{"kind", "time_dependent"},
                  {"schedule",
                   {{{"t", 0.0}, {"fn", {{"kind", "constant"}, {"value", 2.0}}}},
                    {{"t", 1.0}, {"fn", {{"kind", "smooth_indicator"}, {"center", {0.0, 0.0}}, {"radius", 0.5}, {"ramp", 0.25}}}}}}};
  const auto phi = test_fn_from_json(f, 2);
  const auto again = test_fn_from_json(test_fn_to_json(phi, 2), 2);
  for (double t : {0.0, 0.3, 1.0})
    CHECK(again.value(t, Point{0.6, 0.1}, 2) == phi.value(t, Point{0.6, 0.1}, 2));
}

TEST_CASE("simulate is reproducible under a fixed seed") {
  const auto c = parse_config(small_config());
  std::ostringstream log;
  const auto a = scratch("sim_a"), b = scratch("sim_b");
  CHECK(cmd_simulate(c, a.string(), log).exit_code == 0);
  CHECK(cmd_simulate(c, b.string(), log).exit_code == 0);
  CHECK(slurp(a / "replicas.csv") == slurp(b / "replicas.csv"));
  CHECK(fs::exists(a / "summary.json"));
  auto c2 = c;
  c2.run.seed = 5;
  const auto d = scratch("sim_c");
  cmd_simulate(c2, d.string(), log);
  CHECK(slurp(a / "replicas.csv") != slurp(d / "replicas.csv"));
}

TEST_CASE("decomposition check passes on a small LV run") {
  const auto c = parse_config(small_config());
  std::ostringstream log;
  const auto out = scratch("dec");
  const auto r = cmd_decomposition_check(c, out.string(), log);
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(out / "decomposition.json"));
  CHECK(fs::exists(out / "decomposition_N10_f0.csv"));
}

TEST_CASE("verify-convergence requires a constants report") {
  const auto c = parse_config(small_config());
  std::ostringstream log;
  CHECK_THROWS_AS(cmd_verify_convergence(c, scratch("ver").string(), log), ConfigError);
}

TEST_CASE("estimate-constants then verify-convergence") {
  auto j = small_config();
  j["model"]["kernel"] = {{"d", 3}, {"variant", "nearest_neighbor"}};
  j["model"]["initial"] = {{"kind", "box"}, {"lo", {0, 0, 0}}, {"hi", {1, 1, 1}}};
  j["analysis"] = {{"constants", {{"horizon", 5}, {"replicas", 500}, {"sigma_replicas", 100}, {"sigma_set_limit", 2}}}};
  auto c = parse_config(j);
  std::ostringstream log;
  const auto out = scratch("const");
  cmd_estimate_constants(c, out.string(), log);
  const auto rep = read_json_file((out / "constants.json").string());
  CHECK(rep["theta"]["method"] == "coalescing-beta-delta");
  CHECK(rep["gamma_N"].size() == 2);
  CHECK(rep["sigma2"].get<double>() == doctest::Approx(1.0 / 3));
  c.analysis.constants.report = (out / "constants.json").string();
  const auto v = scratch("verify");
  const auto r = cmd_verify_convergence(c, v.string(), log);
  const auto conv = read_json_file((v / "convergence.json").string());
  CHECK(conv["drift"]["verdict"]["label"] == "insufficient replicas");
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(v / "convergence.csv"));
}

TEST_CASE("coupling check on a small LV model") {
  auto j = small_config();
  j["model"]["kernel"] = {{"d", 3}, {"variant", "nearest_neighbor"}};
  j["model"]["initial"] = {{"kind", "box"}, {"lo", {0, 0, 0}}, {"hi", {1, 1, 1}}};
  j["model"]["N"] = {20};
  j["analysis"] = json::object();
  const auto c = parse_config(j);
  std::ostringstream log;
  const auto out = scratch("coupling");
  cmd_coupling_check(c, out.string(), log);
  const auto rep = read_json_file((out / "coupling.json").string());
  CHECK(rep["cells"][0]["violations"] == 0);
  CHECK(rep["cells"][0]["k_delta"].get<double>() == doctest::Approx(1.0));
}
