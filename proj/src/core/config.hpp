#pragma once

// Experiment configuration: one JSON document (comments allowed) with nested
// sections. Unknown keys are rejected. The fingerprint hashes the canonical
// resolved form, excluding the output block.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dram.hpp"
#include "engine.hpp"
#include "hashgrid.hpp"
#include "mapping.hpp"
#include "nerf_ref.hpp"
#include "parallelism.hpp"
#include "workload.hpp"

#include <json.hpp>

namespace nmpnerf {

struct WorkloadConfig {
  workload::SceneKind scene = workload::SceneKind::Orbit;
  int rays = 256;
  int samples_per_ray = 128;
  workload::StreamOrder order = workload::StreamOrder::RayFirst;
  uint64_t seed = 1;
  bool register_enabled = true;
  uint32_t register_capacity = 1;
};

struct MappingConfig {
  mapping::SubarrayMapping subarray = mapping::SubarrayMapping::IntraLevel;
  mapping::LevelPolicy level_policy = mapping::LevelPolicy::GroupedBalanced;
  std::vector<std::vector<int>> groups;  // empty: default grouping
};

struct ParallelismConfig {
  parallelism::PlanKind strategy = parallelism::PlanKind::Heterogeneous;
  double link_bytes_per_cycle = 2.0;
  uint32_t grad_bytes = 4;
};

enum class HistogramPairs { TableNeighbors, LatticeEdges };
const char* to_string(HistogramPairs p);
HistogramPairs histogram_pairs_from_string(std::string_view name);

struct EnergyTable {
  double activation = 0.0;
  double rw_byte = 0.0;
  double pe_op = 0.0;
  double interbank_byte = 0.0;
  bool enabled() const { return activation > 0 || rw_byte > 0 || pe_op > 0 || interbank_byte > 0; }
};

struct ReportConfig {
  uint64_t histogram_samples = 100000;
  HistogramPairs histogram_pairs = HistogramPairs::TableNeighbors;
  double external_io_bytes_per_cycle = 2.0;
  uint32_t external_burst_bytes = 32;
  EnergyTable energy;
};

struct OutputConfig {
  std::string dir = "out";
  bool trace_csv = false;
  bool command_log = false;
};

struct TimingConfig {
  dram::DramTimingParams params;
  dram::Scheduler scheduler = dram::Scheduler::FRFCFS;
  uint32_t window = 16;
};

struct ExperimentConfig {
  grid::HashGridConfig grid;
  nerf::MlpConfig mlp;
  WorkloadConfig workload;
  mapping::DramGeometry geometry;
  TimingConfig timing;
  engine::EngineConfig engine;
  MappingConfig mapping;
  ParallelismConfig parallelism;
  ReportConfig report;
  OutputConfig output;

  void validate() const;
  uint64_t batch_points() const { return uint64_t(workload.rays) * uint64_t(workload.samples_per_ray); }
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

uint64_t fnv1a64(std::string_view bytes);
uint64_t config_fingerprint(const ExperimentConfig& cfg);
std::string fingerprint_hex(uint64_t fp);

// Applies a comma-separated list of presets ("proposed", "baseline") and
// "key=value" overrides, left to right. Keys: hash_kind, order, mapping, strategy,
// register, scene, scheduler, level_policy, seed.
void apply_scenario(ExperimentConfig& cfg, const std::string& scenario);
void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value);

}  // namespace nmpnerf
