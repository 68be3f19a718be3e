#include "engine.hpp"

#include <algorithm>

#include "error.hpp"

namespace nmpnerf::engine {

using workload::Kernel;

void EngineConfig::validate(uint32_t row_bytes) const {
  if (int_lanes == 0 || fp_lanes == 0) throw ConfigError("engine lanes must be > 0");
  if (scratchpad_bytes < row_bytes)
    throw ConfigError("engine.scratchpad_bytes must hold at least one DRAM row");
  if (clock_mhz == 0) throw ConfigError("engine.clock_mhz must be > 0");
  if (ht_tile_points == 0 || mlp_tile_points == 0)
    throw ConfigError("engine tile sizes must be > 0");
}

uint64_t ceil_div(uint64_t a, uint64_t b) { return b == 0 ? 0 : (a + b - 1) / b; }

uint64_t int_cycles_hash_index(uint64_t points, uint64_t levels, uint32_t lanes,
                               uint64_t hash_cost) {
  return ceil_div(points * levels * 8 * hash_cost, lanes);
}

uint64_t fp_cycles_interp(uint64_t points, uint64_t levels, uint64_t feature_dim, uint32_t lanes,
                          uint64_t combine_ops) {
  return ceil_div(points * levels * (8 * feature_dim + combine_ops), lanes);
}

uint64_t mlp_macs(uint64_t points, std::span<const nerf::LayerDim> layers) {
  uint64_t per_point = 0;
  for (const auto& l : layers) per_point += uint64_t(l.in) * uint64_t(l.out);
  return points * per_point;
}

uint64_t fp_cycles_mlp(uint64_t points, std::span<const nerf::LayerDim> layers, uint32_t lanes) {
  return ceil_div(mlp_macs(points, layers), lanes);
}

ComputeCost compute_cost(const KernelWorkItem& w, const EngineConfig& cfg) {
  ComputeCost c;
  if (w.points == 0) return c;
  c.setup = cfg.setup_cycles;
  switch (w.kernel) {
    case Kernel::HT:
    case Kernel::HT_b:
      c.int_cycles = int_cycles_hash_index(w.points, w.levels, cfg.int_lanes, cfg.hash_cost(w.hash_kind));
      c.fp_cycles = fp_cycles_interp(w.points, w.levels, w.feature_dim, cfg.fp_lanes,
                                     cfg.interp_combine_ops);
      break;
    case Kernel::MLP:
      c.fp_cycles = fp_cycles_mlp(w.points, w.layers, cfg.fp_lanes);
      break;
    case Kernel::MLP_b:
      c.fp_cycles = ceil_div(2 * mlp_macs(w.points, w.layers), cfg.fp_lanes);
      break;
  }
  return c;
}

uint64_t tile_bytes(const KernelWorkItem& w, const EngineConfig& cfg) {
  if (w.kernel == Kernel::HT || w.kernel == Kernel::HT_b) {
    // One level at a time: point coordinates plus that level's features.
    return uint64_t{cfg.ht_tile_points} * (3 * 4 + w.feature_dim * w.bytes_per_feature);
  }
  uint64_t widest = 0;
  for (const auto& l : w.layers) widest = std::max<uint64_t>({widest, uint64_t(l.in), uint64_t(l.out)});
  return uint64_t{cfg.mlp_tile_points} * widest * w.bytes_per_value;
}

uint64_t tile_count(const KernelWorkItem& w, const EngineConfig& cfg) {
  if (w.kernel == Kernel::HT || w.kernel == Kernel::HT_b)
    return ceil_div(w.points, cfg.ht_tile_points) * w.levels;
  return ceil_div(w.points, cfg.mlp_tile_points);
}

void check_scratchpad(const KernelWorkItem& w, const EngineConfig& cfg) {
  const uint64_t t = tile_bytes(w, cfg);
  if (2 * t > cfg.scratchpad_bytes)
    throw ConfigError(std::string(workload::to_string(w.kernel)) + " tile of " + std::to_string(t) +
                      " bytes does not double-buffer in a " +
                      std::to_string(cfg.scratchpad_bytes) + "-byte scratchpad");
}

StepResult combine(uint64_t compute_cycles, uint64_t memory_cycles, uint64_t tiles) {
  StepResult r;
  r.compute_cycles = compute_cycles;
  r.memory_cycles = memory_cycles;
  r.fill = ceil_div(memory_cycles, std::max<uint64_t>(tiles, 1));
  const uint64_t lo = std::min(compute_cycles, memory_cycles);
  r.cycles = std::max(compute_cycles, memory_cycles) + std::min(r.fill, lo);
  r.overlap = compute_cycles + memory_cycles - r.cycles;
  return r;
}

StepRun execute_step(const KernelWorkItem& work, std::span<const workload::MemoryRequest> trace,
                     const mapping::AddressMap& map, const dram::DramTimingParams& timing,
                     const dram::ServiceOptions& service, const EngineConfig& cfg,
                     uint32_t exec_bank) {
  check_scratchpad(work, cfg);
  StepRun run;
  run.dram = dram::service_trace(trace, map, timing, service, exec_bank);
  const uint64_t memory = uint64_t(std::max<int64_t>(run.dram.stats.total_cycles, 0));
  run.result = combine(compute_cost(work, cfg).total(), memory, tile_count(work, cfg));
  return run;
}

}  // namespace nmpnerf::engine
