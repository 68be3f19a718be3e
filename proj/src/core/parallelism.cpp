#include "parallelism.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"

namespace nmpnerf::parallelism {

const char* to_string(Step s) {
  switch (s) {
    case Step::HT: return "HT";
    case Step::MLP: return "MLP";
    case Step::MLP_b: return "MLP_b";
    case Step::HT_b: return "HT_b";
  }
  return "?";
}

workload::Kernel kernel_of(Step s) {
  switch (s) {
    case Step::HT: return workload::Kernel::HT;
    case Step::MLP: return workload::Kernel::MLP;
    case Step::MLP_b: return workload::Kernel::MLP_b;
    case Step::HT_b: return workload::Kernel::HT_b;
  }
  return workload::Kernel::HT;
}

const char* to_string(Strategy s) {
  return s == Strategy::ParameterParallel ? "parameter" : "data";
}

const char* to_string(PlanKind k) {
  switch (k) {
    case PlanKind::Heterogeneous: return "heterogeneous";
    case PlanKind::PureData: return "pure_data";
    case PlanKind::PureParameter: return "pure_param";
  }
  return "?";
}

PlanKind plan_kind_from_string(std::string_view name) {
  if (name == "heterogeneous") return PlanKind::Heterogeneous;
  if (name == "pure_data") return PlanKind::PureData;
  if (name == "pure_param") return PlanKind::PureParameter;
  throw ConfigError("unknown parallelism strategy '" + std::string(name) +
                    "' (expected heterogeneous|pure_data|pure_param)");
}

std::array<Strategy, 4> strategies_for(PlanKind kind) {
  using S = Strategy;
  switch (kind) {
    case PlanKind::Heterogeneous:
      return {S::ParameterParallel, S::DataParallel, S::DataParallel, S::ParameterParallel};
    case PlanKind::PureData:
      return {S::DataParallel, S::DataParallel, S::DataParallel, S::DataParallel};
    case PlanKind::PureParameter:
      return {S::ParameterParallel, S::ParameterParallel, S::ParameterParallel,
              S::ParameterParallel};
  }
  return {};
}

std::array<StepSpec, 4> derive_step_specs(const grid::HashGridConfig& grid,
                                          const nerf::MlpConfig& mlp, uint64_t points) {
  const uint64_t bpf = uint64_t(grid.bytes_per_feature);
  const uint64_t F = uint64_t(grid.feature_dim);
  const uint64_t L = uint64_t(grid.levels);
  uint64_t entries = 0;
  for (const auto& lv : grid.level_configs()) entries += lv.entries;
  const int input_dim = grid.levels * grid.feature_dim;
  const uint64_t weights = nerf::mlp_weight_count(mlp, input_dim);

  const uint64_t coords = points * 3 * 4;
  const uint64_t embed = points * L * F * bpf;
  const uint64_t rgb = points * uint64_t(mlp.out_dims) * bpf;
  const uint64_t hidden = points * uint64_t(mlp.max_hidden()) * bpf;

  std::array<StepSpec, 4> s{};
  s[0] = {Step::HT, entries * F * bpf, entries * F, coords, embed, 0};
  s[1] = {Step::MLP, weights * bpf, weights, embed, rgb, hidden};
  s[2] = {Step::MLP_b, weights * bpf, weights, rgb, embed, hidden};
  s[3] = {Step::HT_b, entries * F * bpf, entries * F, embed, 0, 0};
  return s;
}

void MovementLedger::add(const MovementLedger& o) {
  cat1_duplication_bytes += o.cat1_duplication_bytes;
  cat2_interstep_bytes += o.cat2_interstep_bytes;
  cat3_intrastep_bytes += o.cat3_intrastep_bytes;
  cat4_gradient_reduce_bytes += o.cat4_gradient_reduce_bytes;
}

namespace {

bool is_backward(Step s) { return s == Step::MLP_b || s == Step::HT_b; }

// HT_b under parameter parallelism receives only the gradient slice of the
// levels each bank owns, so its input is partitioned rather than broadcast.
bool input_partitioned_by_params(Step s) { return s == Step::HT_b; }

}  // namespace

ParallelismPlan plan(const std::array<Strategy, 4>& strategies,
                     const std::array<StepSpec, 4>& specs, const PlanOptions& opt) {
  if (opt.n_banks == 0) throw ConfigError("parallelism needs at least one bank");
  if (opt.table_owners == 0 || opt.table_owners > opt.n_banks)
    throw ConfigError("table owner count must be in [1, n_banks]");
  const uint64_t n = opt.n_banks;
  ParallelismPlan out;
  for (size_t i = 0; i < 4; ++i) {
    StepPlan& sp = out.steps[i];
    const StepSpec& spec = specs[i];
    sp.step = spec.step;
    sp.strategy = strategies[i];
    const bool table_step = spec.step == Step::HT || spec.step == Step::HT_b;
    if (sp.strategy == Strategy::ParameterParallel) {
      sp.participants = table_step ? opt.table_owners : opt.n_banks;
      const uint64_t p = sp.participants;
      if (!input_partitioned_by_params(spec.step))
        sp.ledger.cat1_duplication_bytes = spec.input_bytes * (p - 1);
      sp.ledger.cat3_intrastep_bytes = spec.intermediate_bytes * (p - 1);
    } else {
      sp.participants = opt.n_banks;
      // Parameters are replicated once per iteration; the backward step reuses them.
      if (!is_backward(spec.step)) sp.ledger.cat1_duplication_bytes = spec.param_bytes * (n - 1);
      if (is_backward(spec.step))
        sp.ledger.cat4_gradient_reduce_bytes = spec.param_elements * opt.grad_bytes * (n - 1);
    }
  }
  // Cat2: the producer's output must be re-sharded unless both steps split
  // points the same way, or the consumer broadcasts its input anyway (Cat1).
  for (size_t i = 1; i < 4; ++i) {
    const Strategy prod = strategies[i - 1];
    const Strategy cons = strategies[i];
    const uint64_t tensor = specs[i].input_bytes;
    uint64_t moved = 0;
    if (prod == Strategy::DataParallel && cons == Strategy::DataParallel) {
      moved = 0;
    } else if (cons == Strategy::ParameterParallel && !input_partitioned_by_params(specs[i].step)) {
      moved = 0;
    } else {
      moved = tensor - tensor / std::max<uint64_t>(n, 1);
    }
    out.steps[i].ledger.cat2_interstep_bytes = moved;
  }
  for (const auto& sp : out.steps) out.total.add(sp.ledger);
  return out;
}

ParallelismPlan plan(PlanKind kind, const std::array<StepSpec, 4>& specs, const PlanOptions& opt) {
  ParallelismPlan p = plan(strategies_for(kind), specs, opt);
  p.kind = kind;
  return p;
}

IterationResult schedule_iteration(const ParallelismPlan& plan,
                                   const std::array<std::vector<uint64_t>, 4>& bank_cycles,
                                   double link_bytes_per_cycle) {
  if (!(link_bytes_per_cycle > 0.0)) throw ConfigError("inter-bank link bandwidth must be > 0");
  IterationResult r;
  for (size_t i = 0; i < 4; ++i) {
    StepTiming& t = r.steps[i];
    t.bank_cycles = bank_cycles[i];
    for (uint64_t c : t.bank_cycles) t.step_cycles = std::max(t.step_cycles, c);
    t.movement_cycles =
        uint64_t(std::ceil(double(plan.steps[i].ledger.total()) / link_bytes_per_cycle));
    r.compute_memory_cycles += t.step_cycles;
    r.movement_cycles += t.movement_cycles;
  }
  r.total_cycles = r.compute_memory_cycles + r.movement_cycles;
  return r;
}

}  // namespace nmpnerf::parallelism
