#pragma once

// Per-bank near-memory engine cost model: INT32 and FP32 lane groups, a small
// scratchpad, a fixed controller setup cost, and double-buffered overlap of
// compute with DRAM service.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dram.hpp"
#include "hashgrid.hpp"
#include "mapping.hpp"
#include "nerf_ref.hpp"
#include "workload.hpp"

namespace nmpnerf::engine {

struct EngineConfig {
  uint32_t int_lanes = 256;
  uint32_t fp_lanes = 256;
  uint32_t scratchpad_bytes = 2048;
  uint32_t clock_mhz = 200;
  uint32_t hash_register_count = 8;
  uint64_t setup_cycles = 16;
  // Integer ops per vertex index.
  uint64_t hash_cost_morton = 17;
  uint64_t hash_cost_xor = 6;
  // FP ops per point-level on top of the 8 x F vertex MACs.
  uint64_t interp_combine_ops = 7;
  uint32_t ht_tile_points = 32;
  uint32_t mlp_tile_points = 8;

  void validate(uint32_t row_bytes) const;
  uint64_t hash_cost(grid::HashKind kind) const {
    return kind == grid::HashKind::Morton ? hash_cost_morton : hash_cost_xor;
  }
};

uint64_t ceil_div(uint64_t a, uint64_t b);

uint64_t int_cycles_hash_index(uint64_t points, uint64_t levels, uint32_t lanes,
                               uint64_t hash_cost = 17);
uint64_t fp_cycles_interp(uint64_t points, uint64_t levels, uint64_t feature_dim, uint32_t lanes,
                          uint64_t combine_ops = 7);
uint64_t mlp_macs(uint64_t points, std::span<const nerf::LayerDim> layers);
uint64_t fp_cycles_mlp(uint64_t points, std::span<const nerf::LayerDim> layers, uint32_t lanes);

struct KernelWorkItem {
  workload::Kernel kernel = workload::Kernel::HT;
  uint64_t points = 0;
  uint64_t levels = 0;  // levels handled by this bank (HT, HT_b)
  uint64_t feature_dim = 2;
  uint64_t bytes_per_feature = 2;
  grid::HashKind hash_kind = grid::HashKind::Morton;
  std::vector<nerf::LayerDim> layers;  // MLP, MLP_b
  uint64_t bytes_per_value = 2;
};

struct ComputeCost {
  uint64_t setup = 0;
  uint64_t int_cycles = 0;
  uint64_t fp_cycles = 0;
  uint64_t total() const { return setup + int_cycles + fp_cycles; }
};

// Backward passes: HT_b repeats the index work and scatters 8 x F gradient
// MACs; MLP_b costs two MACs per weight (input and weight gradients).
ComputeCost compute_cost(const KernelWorkItem& work, const EngineConfig& cfg);

// Bytes one tile keeps in the scratchpad; double buffering needs twice this.
uint64_t tile_bytes(const KernelWorkItem& work, const EngineConfig& cfg);
uint64_t tile_count(const KernelWorkItem& work, const EngineConfig& cfg);
// Throws ConfigError naming the tile when two tiles do not fit.
void check_scratchpad(const KernelWorkItem& work, const EngineConfig& cfg);

struct StepResult {
  uint64_t cycles = 0;
  uint64_t compute_cycles = 0;
  uint64_t memory_cycles = 0;
  uint64_t overlap = 0;  // compute + memory - cycles
  uint64_t fill = 0;
};

// total = max(c, m) + min(fill, min(c, m)), fill = ceil(m / tiles).
StepResult combine(uint64_t compute_cycles, uint64_t memory_cycles, uint64_t tiles);

struct StepRun {
  StepResult result;
  dram::ServiceResult dram;
};

StepRun execute_step(const KernelWorkItem& work, std::span<const workload::MemoryRequest> trace,
                     const mapping::AddressMap& map, const dram::DramTimingParams& timing,
                     const dram::ServiceOptions& service, const EngineConfig& cfg,
                     uint32_t exec_bank = 0);

}  // namespace nmpnerf::engine
