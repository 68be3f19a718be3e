#pragma once

// End-to-end scenario runner: synthesizes the batch, builds per-step traces,
// services them on the bank models, plans inter-bank movement and assembles
// reports. Also the trace/sim/sweep/report commands behind the CLI.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "dram.hpp"
#include "engine.hpp"
#include "mapping.hpp"
#include "parallelism.hpp"
#include "workload.hpp"

#include <json.hpp>

namespace nmpnerf::experiment {

struct Prepared {
  ExperimentConfig cfg;
  std::vector<grid::LevelConfig> levels;
  workload::TableLayout layout;
  mapping::LevelGroupAssignment assignment;
  std::optional<mapping::AddressMap> map;
  std::vector<grid::Point3> stream;

  static Prepared make(const ExperimentConfig& cfg);
};

struct BankStep {
  uint32_t bank = 0;
  uint64_t points = 0;
  uint64_t levels = 0;
  engine::StepResult result;
  dram::DramStats dram;
};

struct StepOutcome {
  parallelism::Step step = parallelism::Step::HT;
  parallelism::Strategy strategy = parallelism::Strategy::ParameterParallel;
  std::vector<BankStep> banks;   // banks that did work, ascending id
  uint64_t step_cycles = 0;      // max over banks
  uint64_t memory_cycles = 0;    // max over banks of DRAM service time
  dram::DramStats dram;          // summed counts
  workload::TraceMeta meta;
  uint64_t entry_requests = 0;   // before row coalescing
  workload::CoalesceStats coalesce;
};

// HT or HT_b. `preloaded` replaces the generated entry-level trace (HT only).
StepOutcome run_table_step(const Prepared& prep, workload::Kernel kernel,
                           parallelism::Strategy strategy,
                           const workload::AccessTrace* preloaded = nullptr);
StepOutcome run_mlp_step(const Prepared& prep, workload::Kernel kernel,
                         parallelism::Strategy strategy);

struct HtMetrics {
  uint64_t points = 0;
  uint64_t consumed_bytes = 0;
  uint64_t memory_cycles = 0;
  uint32_t banks_used = 0;
  double effective_bytes_per_cycle = 0.0;
  double peak_bytes_per_cycle = 0.0;
  double utilization = 0.0;
  uint64_t bank_conflicts = 0;
  double row_hit_rate = 0.0;
  double register_hit_rate = 0.0;
  uint64_t entry_requests = 0;
  uint64_t row_requests = 0;
  double row_requests_per_cube = 0.0;
  double row_requests_per_fetched_cube = 0.0;
  double row_requests_per_point = 0.0;
  uint64_t external_io_cycles = 0;
  double external_io_bytes_per_cycle = 0.0;
  double delivered_over_external = 0.0;
};

struct ScenarioResult {
  std::string name;
  nlohmann::json settings;
  std::string error;  // non-empty when the scenario failed
  HtMetrics ht;
  std::array<StepOutcome, 4> steps{};
  parallelism::ParallelismPlan plan;
  parallelism::IterationResult iteration;
  std::optional<double> energy;

  bool ok() const { return error.empty(); }
};

ScenarioResult run_scenario(const ExperimentConfig& cfg, const std::string& name = "default",
                            const workload::AccessTrace* ht_trace = nullptr);

nlohmann::json scenario_to_json(const ScenarioResult& r);

struct SweepAxis {
  std::string key;
  std::vector<std::string> values;
};

// "hash_kind,order" uses each axis' full value set; "key=a|b" picks values.
std::vector<SweepAxis> parse_axes(const std::string& spec);

struct RatioEntry {
  size_t a = 0;
  size_t b = 0;
  std::optional<double> effective_bandwidth;  // a / b
  std::optional<double> speedup;              // cycles b / cycles a
  std::optional<double> ledger;               // bytes a / bytes b
};

struct SweepResult {
  std::vector<ScenarioResult> scenarios;
  std::vector<RatioEntry> ratios;
  bool all_ok() const;
};

// Scenarios run on up to `threads` worker threads; results keep the
// Cartesian-product order regardless of completion order.
SweepResult run_sweep(const ExperimentConfig& base, const std::vector<SweepAxis>& axes,
                      unsigned threads = 0, bool reverse_execution = false);

nlohmann::json report_json(const ExperimentConfig& cfg, const std::vector<ScenarioResult>& scenarios,
                           const std::vector<RatioEntry>& ratios);
std::string report_csv(const nlohmann::json& report);

struct TraceSummary {
  uint64_t points = 0;
  uint64_t requests = 0;
  uint64_t bytes = 0;
  uint64_t upper_bound_requests = 0;  // points x levels x 8
  std::filesystem::path trace_path;
  std::filesystem::path meta_path;
};

workload::AccessTrace generate_config_trace(const ExperimentConfig& cfg);
TraceSummary cmd_trace(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

// Reads a trace and its sidecar; throws ConfigError on a fingerprint mismatch.
workload::AccessTrace load_trace_for(const ExperimentConfig& cfg,
                                     const std::filesystem::path& trace_path);

nlohmann::json cmd_sim(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                       const std::string& scenario_name = "default",
                       const std::optional<std::filesystem::path>& trace_path = std::nullopt);

// Returns the combined report; `ok` is false when any scenario failed.
nlohmann::json cmd_sweep(const ExperimentConfig& cfg, const std::vector<SweepAxis>& axes,
                         const std::filesystem::path& out_dir, bool& ok, unsigned threads = 0);

// Locality histogram and ledger comparison for the config; converts an
// existing report JSON to CSV when given.
nlohmann::json cmd_report(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                          const std::optional<std::filesystem::path>& report_path = std::nullopt);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace nmpnerf::experiment
