#include <doctest.h>

#include "config.hpp"
#include "error.hpp"

using namespace nmpnerf;

TEST_CASE("round trip through JSON") {
  ExperimentConfig c;
  c.workload.seed = 99;
  c.grid.hash_kind = grid::HashKind::XorSpatial;
  c.mapping.groups = {{0, 1}, {2, 3, 4, 5}, {6, 7, 8, 9, 10, 11, 12, 13, 14, 15}};
  c.timing.params.refresh = true;
  const auto back = config_from_json(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));
  CHECK(config_fingerprint(back) == config_fingerprint(c));
}

TEST_CASE("comments and partial sections") {
  const auto c = parse_config(R"({
    // only override what differs
    "workload": { "rays": 4, /* tiny */ "seed": 7 },
    "grid": { "hash": "xor" }
  })");
  CHECK(c.workload.rays == 4);
  CHECK(c.workload.seed == 7);
  CHECK(c.grid.hash_kind == grid::HashKind::XorSpatial);
  CHECK(c.grid.levels == 16);
}

TEST_CASE("rejections") {
  CHECK_THROWS_AS(parse_config(R"({"workload": {"rayz": 4}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"nonsense": {}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"workload": {"rays": "many"}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"grid": {"primes": [1, 2]}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"grid": {"primes": [1, 2, -3]}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"grid": {"hash": "sha"}})"), ConfigError);
  CHECK_THROWS_AS(parse_config("{ not json"), ParseError);
  CHECK_THROWS_AS(load_config("/nonexistent/cfg.json"), IoError);
  CHECK_THROWS_AS(parse_config(R"({"geometry": {"banks_per_chip": 4}})"), ConfigError);
}

TEST_CASE("fingerprint ignores the output block") {
  ExperimentConfig a, b;
  b.output.dir = "elsewhere";
  b.output.command_log = true;
  CHECK(config_fingerprint(a) == config_fingerprint(b));
  b.workload.seed = 2;
  CHECK(config_fingerprint(a) != config_fingerprint(b));
  CHECK(fingerprint_hex(0xabc).size() == 16);
  CHECK(fingerprint_hex(0xabc) == "0000000000000abc");
  // FNV-1a 64 reference values.
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
}

TEST_CASE("scenario presets and overrides") {
  ExperimentConfig c;
  apply_scenario(c, "baseline");
  CHECK(c.grid.hash_kind == grid::HashKind::XorSpatial);
  CHECK(c.workload.order == workload::StreamOrder::RandomShuffle);
  CHECK_FALSE(c.workload.register_enabled);
  apply_scenario(c, "proposed,scene=object,seed=5");
  CHECK(c.grid.hash_kind == grid::HashKind::Morton);
  CHECK(c.workload.scene == workload::SceneKind::Object);
  CHECK(c.workload.seed == 5);
  apply_scenario(c, "mapping=rowmajor,strategy=pure_data,register=off,scheduler=fcfs");
  CHECK(c.mapping.subarray == mapping::SubarrayMapping::RowMajor);
  CHECK(c.parallelism.strategy == parallelism::PlanKind::PureData);
  CHECK(c.timing.scheduler == dram::Scheduler::FCFS);
  CHECK_THROWS_AS(apply_scenario(c, "nosuch"), ConfigError);
  CHECK_THROWS_AS(apply_scenario(c, "hash_kind=md5"), ConfigError);
  CHECK_THROWS_AS(apply_scenario(c, "colour=red"), ConfigError);
}

TEST_CASE("shipped default config matches the built-in defaults") {
  const auto c = load_config(NMPNERF_SOURCE_DIR "/configs/default.json");
  CHECK(config_to_json(c) == config_to_json(ExperimentConfig{}));
  CHECK(config_fingerprint(c) == config_fingerprint(ExperimentConfig{}));
}
