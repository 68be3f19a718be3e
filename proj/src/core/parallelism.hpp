#pragma once

// Inter-bank parallelism planning for one training iteration
// HT -> MLP -> MLP_b -> HT_b, the four-category movement ledger, and the
// iteration schedule (step time = slowest bank, movement at step boundaries).

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hashgrid.hpp"
#include "nerf_ref.hpp"
#include "workload.hpp"

namespace nmpnerf::parallelism {

enum class Step { HT = 0, MLP = 1, MLP_b = 2, HT_b = 3 };
inline constexpr std::array<Step, 4> kSteps{Step::HT, Step::MLP, Step::MLP_b, Step::HT_b};
const char* to_string(Step s);
workload::Kernel kernel_of(Step s);

enum class Strategy { ParameterParallel, DataParallel };
const char* to_string(Strategy s);

enum class PlanKind { Heterogeneous, PureData, PureParameter };
const char* to_string(PlanKind k);
PlanKind plan_kind_from_string(std::string_view name);
std::array<Strategy, 4> strategies_for(PlanKind kind);

struct StepSpec {
  Step step = Step::HT;
  uint64_t param_bytes = 0;
  uint64_t param_elements = 0;  // trainable scalars, for gradient reduction
  uint64_t input_bytes = 0;
  uint64_t output_bytes = 0;
  uint64_t intermediate_bytes = 0;
};

// Byte widths: coordinates 4 B, features and activations at the grid's
// bytes_per_feature.
std::array<StepSpec, 4> derive_step_specs(const grid::HashGridConfig& grid,
                                          const nerf::MlpConfig& mlp, uint64_t points);

struct MovementLedger {
  uint64_t cat1_duplication_bytes = 0;
  uint64_t cat2_interstep_bytes = 0;
  uint64_t cat3_intrastep_bytes = 0;
  uint64_t cat4_gradient_reduce_bytes = 0;
  uint64_t total() const {
    return cat1_duplication_bytes + cat2_interstep_bytes + cat3_intrastep_bytes +
           cat4_gradient_reduce_bytes;
  }
  void add(const MovementLedger& o);
};

struct StepPlan {
  Step step = Step::HT;
  Strategy strategy = Strategy::ParameterParallel;
  uint32_t participants = 1;
  MovementLedger ledger;  // Cat2 is charged to the consuming step
};

struct PlanOptions {
  uint32_t n_banks = 16;
  uint32_t table_owners = 8;  // banks holding hash-table levels under parameter parallelism
  uint32_t grad_bytes = 4;
};

struct ParallelismPlan {
  PlanKind kind = PlanKind::Heterogeneous;
  std::array<StepPlan, 4> steps{};
  MovementLedger total;
};

ParallelismPlan plan(const std::array<Strategy, 4>& strategies,
                     const std::array<StepSpec, 4>& specs, const PlanOptions& options);
ParallelismPlan plan(PlanKind kind, const std::array<StepSpec, 4>& specs, const PlanOptions& options);

struct StepTiming {
  std::vector<uint64_t> bank_cycles;  // per bank; idle banks report 0
  uint64_t step_cycles = 0;           // max over banks
  uint64_t movement_cycles = 0;       // charged before the step
};

struct IterationResult {
  std::array<StepTiming, 4> steps{};
  uint64_t compute_memory_cycles = 0;
  uint64_t movement_cycles = 0;
  uint64_t total_cycles = 0;
};

IterationResult schedule_iteration(const ParallelismPlan& plan,
                                   const std::array<std::vector<uint64_t>, 4>& bank_cycles,
                                   double link_bytes_per_cycle);

}  // namespace nmpnerf::parallelism
