#include <doctest.h>

#include <filesystem>
#include <set>

#include "error.hpp"
#include "experiment.hpp"

using namespace nmpnerf;
using namespace nmpnerf::experiment;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small() {
  ExperimentConfig c;
  c.workload.rays = 16;
  c.workload.samples_per_ray = 16;
  return c;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("nmpnerf_unit_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("scenario invariants") {
  const auto r = run_scenario(small(), "s");
  REQUIRE(r.ok());
  CHECK(r.ht.points == 256);
  CHECK(r.ht.consumed_bytes == 256u * 16 * 8 * 4);
  CHECK(r.ht.banks_used == 8);
  CHECK(r.ht.effective_bytes_per_cycle > 0);
  uint64_t sum = 0;
  for (const auto& s : r.iteration.steps) sum += s.step_cycles + s.movement_cycles;
  CHECK(r.iteration.total_cycles == sum);
  for (size_t i = 0; i < 4; ++i) {
    CHECK(r.steps[i].step_cycles == r.iteration.steps[i].step_cycles);
    for (const auto& b : r.steps[i].banks) {
      CHECK(b.result.cycles >= std::max(b.result.compute_cycles, b.result.memory_cycles));
      CHECK(b.result.cycles <= b.result.compute_cycles + b.result.memory_cycles);
    }
  }
  CHECK_FALSE(r.energy.has_value());
}

TEST_CASE("energy is reported only with a table") {
  auto c = small();
  c.report.energy.activation = 1.0;
  const auto r = run_scenario(c);
  REQUIRE(r.energy.has_value());
  uint64_t acts = 0;
  for (const auto& s : r.steps) acts += s.dram.activations;
  CHECK(*r.energy == doctest::Approx(double(acts)));
}

TEST_CASE("AllOneBank loads one bank") {
  auto c = small();
  c.mapping.level_policy = mapping::LevelPolicy::AllOneBank;
  const auto r = run_scenario(c);
  REQUIRE(r.steps[0].banks.size() == 1);
  CHECK(r.iteration.steps[0].step_cycles == r.steps[0].banks[0].result.cycles);
}

TEST_CASE("empty batch") {
  auto c = small();
  c.workload.rays = 0;
  const auto r = run_scenario(c);
  CHECK(r.ok());
  CHECK(r.ht.points == 0);
  CHECK(r.ht.effective_bytes_per_cycle == 0.0);
  const auto sw = run_sweep(c, parse_axes("hash_kind"), 2);
  REQUIRE(sw.ratios.size() == 1);
  CHECK_FALSE(sw.ratios[0].effective_bandwidth.has_value());
  const auto j = report_json(c, sw.scenarios, sw.ratios);
  CHECK(j["ratios"][0]["effective_bandwidth"].is_null());
}

TEST_CASE("axes parsing") {
  auto a = parse_axes("hash_kind,order");
  REQUIRE(a.size() == 2);
  CHECK(a[0].values.size() == 2);
  a = parse_axes("strategy=heterogeneous|pure_data");
  CHECK(a[0].values == std::vector<std::string>{"heterogeneous", "pure_data"});
  CHECK_THROWS_AS(parse_axes("colour"), ConfigError);
  CHECK_THROWS_AS(parse_axes("order=sideways"), ConfigError);
  CHECK_THROWS_AS(parse_axes(""), ConfigError);
  CHECK_THROWS_AS(parse_axes("order,order"), ConfigError);
}

TEST_CASE("2x2 sweep gives 4 scenarios and 6 ratios independent of execution order") {
  const auto axes = parse_axes("hash_kind,order");
  const auto fwd = run_sweep(small(), axes, 1, false);
  const auto rev = run_sweep(small(), axes, 3, true);
  REQUIRE(fwd.scenarios.size() == 4);
  CHECK(fwd.ratios.size() == 6);
  CHECK(fwd.all_ok());
  CHECK(fwd.scenarios[0].name == "hash_kind=morton,order=ray_first");
  CHECK(fwd.scenarios[3].name == "hash_kind=xor,order=random");
  CHECK(report_json(small(), fwd.scenarios, fwd.ratios).dump() ==
        report_json(small(), rev.scenarios, rev.ratios).dump());
}

TEST_CASE("strategy sweep orders ledgers with heterogeneous minimal") {
  const auto sw = run_sweep(small(), parse_axes("strategy"), 3);
  REQUIRE(sw.scenarios.size() == 3);
  const auto het = sw.scenarios[0].plan.total.total();
  CHECK(het < sw.scenarios[1].plan.total.total());
  CHECK(het < sw.scenarios[2].plan.total.total());
}

TEST_CASE("failed scenarios are recorded and the sweep continues") {
  auto c = small();
  c.geometry.banks_per_chip = 4;  // too few banks for eight table owners
  c.mapping.level_policy = mapping::LevelPolicy::AllOneBank;
  const auto sw = run_sweep(c, parse_axes("level_policy"), 2);
  REQUIRE(sw.scenarios.size() == 2);
  CHECK(sw.scenarios[0].ok());
  CHECK_FALSE(sw.scenarios[1].ok());
  CHECK_FALSE(sw.all_ok());
  const auto j = report_json(c, sw.scenarios, sw.ratios);
  CHECK(j["scenarios"][1]["error"].is_string());
}

TEST_CASE("trace command, sidecar and fingerprint check") {
  const auto dir = scratch("trace");
  auto c = small();
  const auto s = cmd_trace(c, dir);
  CHECK(s.points == 256);
  CHECK(s.requests <= s.upper_bound_requests);
  CHECK(fs::exists(s.trace_path));
  CHECK(fs::exists(s.meta_path));
  const auto bytes1 = read_text(s.trace_path);
  cmd_trace(c, dir);
  CHECK(read_text(s.trace_path) == bytes1);

  const auto reqs = load_trace_for(c, s.trace_path);
  CHECK(reqs.requests.size() == s.requests);
  CHECK(reqs.meta.points == s.points);
  auto other = c;
  other.workload.seed = 77;
  CHECK_THROWS_AS(load_trace_for(other, s.trace_path), ConfigError);

  // A preloaded trace reproduces the inline run.
  const auto sim_dir = scratch("sim_pre");
  const auto a = cmd_sim(c, sim_dir, "x", s.trace_path);
  const auto b = cmd_sim(c, sim_dir, "x");
  CHECK(a["scenarios"][0]["ht"] == b["scenarios"][0]["ht"]);

  std::string corrupt = bytes1;
  corrupt[0] = 'Z';
  write_text(s.trace_path, corrupt);
  CHECK_THROWS_AS(load_trace_for(c, s.trace_path), ParseError);
  fs::remove(s.meta_path);
  CHECK_THROWS_AS(load_trace_for(c, s.trace_path), IoError);

  auto empty = c;
  empty.workload.rays = 0;
  const auto e = cmd_trace(empty, scratch("empty"));
  CHECK(e.requests == 0);
}

TEST_CASE("sim and report commands write their artifacts") {
  const auto dir = scratch("sim");
  auto c = small();
  c.output.command_log = true;
  const auto j1 = cmd_sim(c, dir);
  CHECK(fs::exists(dir / "report.json"));
  CHECK(fs::exists(dir / "report.csv"));
  CHECK(fs::exists(dir / "commands.csv"));
  const auto first = read_text(dir / "report.json");
  cmd_sim(c, dir);
  CHECK(read_text(dir / "report.json") == first);
  CHECK(j1["schema_version"] == 1);
  CHECK(j1["fingerprint"] == fingerprint_hex(config_fingerprint(c)));
  CHECK_FALSE(j1["config"].contains("output"));

  c.report.histogram_samples = 500;
  const auto rep = cmd_report(c, dir, dir / "report.json");
  CHECK(fs::exists(dir / "histogram.csv"));
  CHECK(fs::exists(dir / "ledger.csv"));
  CHECK(rep["ledger"]["heterogeneous"]["total_bytes"] < rep["ledger"]["pure_data"]["total_bytes"]);
  const auto csv = read_text(dir / "report.csv");
  CHECK(csv.find("fingerprint,scenario") == 0);
}
