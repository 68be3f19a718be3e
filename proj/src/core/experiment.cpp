#include "experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "error.hpp"
#include "log.hpp"
#include "report.hpp"

namespace nmpnerf::experiment {

using nlohmann::json;
using parallelism::Step;
using parallelism::Strategy;
using workload::Kernel;

namespace {

constexpr uint64_t kShuffleSalt = 0x9e3779b97f4a7c15ull;

uint64_t slice_begin(uint64_t total, uint64_t parts, uint64_t i) { return total * i / parts; }

void check_service(const dram::ServiceResult& svc, size_t expected, const char* what) {
  if (svc.completion.size() != expected)
    throw InvariantViolation(std::string(what) + ": completion count mismatch");
  for (int64_t c : svc.completion)
    if (c <= 0) throw InvariantViolation(std::string(what) + ": request never completed");
}

void check_step(const engine::StepResult& r, const char* what) {
  const uint64_t hi = r.compute_cycles + r.memory_cycles;
  const uint64_t lo = std::max(r.compute_cycles, r.memory_cycles);
  if (r.cycles < lo || r.cycles > hi)
    throw InvariantViolation(std::string(what) + ": overlap result outside [max, sum]");
}

void add_meta(workload::TraceMeta& into, const workload::TraceMeta& m) {
  into.points += m.points;
  into.levels = m.levels;
  into.cube_lookups += m.cube_lookups;
  into.consumed_bytes += m.consumed_bytes;
  into.entry_lookups += m.entry_lookups;
  into.register_hits += m.register_hits;
}

std::vector<nerf::LayerDim> all_layers(const ExperimentConfig& cfg) {
  auto layers = nerf::density_layers(cfg.mlp, cfg.grid.levels * cfg.grid.feature_dim);
  const auto color = nerf::color_layers(cfg.mlp);
  layers.insert(layers.end(), color.begin(), color.end());
  return layers;
}

dram::ServiceOptions service_options(const ExperimentConfig& cfg) {
  dram::ServiceOptions o;
  o.scheduler = cfg.timing.scheduler;
  o.window = cfg.timing.window;
  return o;
}

}  // namespace

Prepared Prepared::make(const ExperimentConfig& cfg) {
  cfg.validate();
  Prepared p;
  p.cfg = cfg;
  p.levels = cfg.grid.level_configs();
  p.layout = workload::TableLayout::make(p.levels, cfg.grid.entry_bytes(), cfg.geometry.row_bytes);
  p.assignment = mapping::assign_levels_to_banks(cfg.grid.levels, cfg.geometry,
                                                 cfg.mapping.level_policy, cfg.mapping.groups);
  p.map.emplace(cfg.geometry, p.layout, p.assignment, cfg.mapping.subarray);
  const auto batch = workload::synthesize_scene(cfg.workload.scene, cfg.workload.rays,
                                                cfg.workload.samples_per_ray, cfg.workload.seed);
  p.stream = workload::order_points(batch, cfg.workload.order, cfg.workload.seed ^ kShuffleSalt);
  return p;
}

StepOutcome run_table_step(const Prepared& prep, Kernel kernel, Strategy strategy,
                           const workload::AccessTrace* preloaded) {
  const auto& cfg = prep.cfg;
  StepOutcome out;
  out.step = kernel == Kernel::HT ? Step::HT : Step::HT_b;
  out.strategy = strategy;
  const uint32_t row = cfg.geometry.row_bytes;
  workload::HtTraceOptions opts{cfg.workload.register_enabled, cfg.workload.register_capacity, kernel};
  const auto svc_opts = service_options(cfg);
  auto work_for = [&](uint64_t points, uint64_t levels) {
    engine::KernelWorkItem w;
    w.kernel = kernel;
    w.points = points;
    w.levels = levels;
    w.feature_dim = uint64_t(cfg.grid.feature_dim);
    w.bytes_per_feature = uint64_t(cfg.grid.bytes_per_feature);
    w.hash_kind = cfg.grid.hash_kind;
    return w;
  };

  if (strategy == Strategy::ParameterParallel) {
    workload::AccessTrace raw;
    if (preloaded && kernel == Kernel::HT) {
      if (preloaded->meta.points != prep.stream.size())
        throw ConfigError("preloaded trace covers " + std::to_string(preloaded->meta.points) +
                          " points but the batch has " + std::to_string(prep.stream.size()));
      raw = *preloaded;
      raw.meta.points = prep.stream.size();
      raw.meta.levels = uint32_t(prep.levels.size());
      raw.meta.cube_lookups = raw.meta.points * raw.meta.levels;
      raw.meta.entry_lookups = raw.meta.cube_lookups * 8;
      raw.meta.consumed_bytes = raw.meta.entry_lookups * prep.layout.entry_bytes;
    } else {
      raw = workload::generate_ht_trace(prep.stream, cfg.grid, prep.layout, opts);
    }
    const auto co = workload::coalesce_to_rows(raw, row);
    const auto svc = dram::service_trace(co.trace.requests, *prep.map, cfg.timing.params, svc_opts);
    check_service(svc, co.trace.requests.size(), workload::to_string(kernel));
    out.meta = raw.meta;
    out.entry_requests = raw.requests.size();
    out.coalesce = co.stats;
    out.dram = svc.stats;
    for (size_t o = 0; o < prep.assignment.owners.size(); ++o) {
      const uint32_t bank = prep.assignment.owner_bank[o];
      BankStep bs;
      bs.bank = bank;
      bs.points = prep.stream.size();
      bs.levels = prep.assignment.owners[o].size();
      bs.dram = svc.per_bank[bank];
      const auto w = work_for(bs.points, bs.levels);
      engine::check_scratchpad(w, cfg.engine);
      bs.result = engine::combine(engine::compute_cost(w, cfg.engine).total(),
                                  uint64_t(bs.dram.total_cycles), engine::tile_count(w, cfg.engine));
      check_step(bs.result, workload::to_string(kernel));
      out.banks.push_back(bs);
    }
  } else {
    if (preloaded) log::warn("preloaded trace ignored under data parallelism for the table step");
    // Every bank holds a full table copy and processes a slice of the points.
    const auto one = mapping::assign_levels_to_banks(cfg.grid.levels, cfg.geometry,
                                                     mapping::LevelPolicy::AllOneBank);
    const mapping::AddressMap local(cfg.geometry, prep.layout, one, cfg.mapping.subarray);
    const uint32_t n = cfg.geometry.total_banks();
    for (uint32_t b = 0; b < n; ++b) {
      const uint64_t lo = slice_begin(prep.stream.size(), n, b);
      const uint64_t hi = slice_begin(prep.stream.size(), n, b + 1);
      if (hi == lo) continue;
      std::span<const grid::Point3> slice(prep.stream.data() + lo, hi - lo);
      const auto raw = workload::generate_ht_trace(slice, cfg.grid, prep.layout, opts);
      const auto co = workload::coalesce_to_rows(raw, row);
      const auto svc = dram::service_trace(co.trace.requests, local, cfg.timing.params, svc_opts);
      check_service(svc, co.trace.requests.size(), workload::to_string(kernel));
      add_meta(out.meta, raw.meta);
      out.entry_requests += raw.requests.size();
      out.coalesce.groups += co.stats.groups;
      out.coalesce.input_requests += co.stats.input_requests;
      out.coalesce.row_requests += co.stats.row_requests;
      out.dram.add(svc.stats);
      BankStep bs;
      bs.bank = b;
      bs.points = hi - lo;
      bs.levels = prep.levels.size();
      bs.dram = svc.per_bank[0];
      const auto w = work_for(bs.points, bs.levels);
      engine::check_scratchpad(w, cfg.engine);
      bs.result = engine::combine(engine::compute_cost(w, cfg.engine).total(),
                                  uint64_t(bs.dram.total_cycles), engine::tile_count(w, cfg.engine));
      check_step(bs.result, workload::to_string(kernel));
      out.banks.push_back(bs);
    }
  }
  for (const auto& b : out.banks) {
    out.step_cycles = std::max(out.step_cycles, b.result.cycles);
    out.memory_cycles = std::max(out.memory_cycles, b.result.memory_cycles);
  }
  return out;
}

StepOutcome run_mlp_step(const Prepared& prep, Kernel kernel, Strategy strategy) {
  const auto& cfg = prep.cfg;
  StepOutcome out;
  out.step = kernel == Kernel::MLP ? Step::MLP : Step::MLP_b;
  out.strategy = strategy;
  const auto svc_opts = service_options(cfg);
  const uint32_t n = cfg.geometry.total_banks();
  const auto layers = all_layers(cfg);
  const uint64_t total_points = prep.stream.size();

  for (uint32_t b = 0; b < n; ++b) {
    workload::MlpTraceSpec spec;
    spec.kernel = kernel;
    spec.bytes_per_value = uint32_t(cfg.grid.bytes_per_feature);
    spec.grad_bytes = cfg.parallelism.grad_bytes;
    spec.tile_points = cfg.engine.mlp_tile_points;
    spec.base_address = prep.layout.activation_base;
    spec.row_bytes = cfg.geometry.row_bytes;
    if (strategy == Strategy::DataParallel) {
      spec.points = slice_begin(total_points, n, b + 1) - slice_begin(total_points, n, b);
      spec.layers = layers;
    } else {
      // Each bank computes a slice of every layer's output neurons.
      spec.points = total_points;
      for (const auto& l : layers) spec.layers.push_back({l.in, int((l.out + int(n) - 1) / int(n))});
    }
    if (spec.points == 0) continue;
    const auto trace = workload::generate_mlp_trace(spec);
    const auto svc = dram::service_trace(trace.requests, *prep.map, cfg.timing.params, svc_opts, b);
    check_service(svc, trace.requests.size(), workload::to_string(kernel));
    out.dram.add(svc.stats);
    out.entry_requests += trace.requests.size();
    out.meta.points += spec.points;
    out.meta.consumed_bytes += trace.meta.consumed_bytes;

    engine::KernelWorkItem w;
    w.kernel = kernel;
    w.points = spec.points;
    w.layers = spec.layers;
    w.bytes_per_value = spec.bytes_per_value;
    engine::check_scratchpad(w, cfg.engine);
    BankStep bs;
    bs.bank = b;
    bs.points = spec.points;
    bs.dram = svc.per_bank[b];
    bs.result = engine::combine(engine::compute_cost(w, cfg.engine).total(),
                                uint64_t(bs.dram.total_cycles), engine::tile_count(w, cfg.engine));
    check_step(bs.result, workload::to_string(kernel));
    out.banks.push_back(bs);
  }
  for (const auto& b : out.banks) {
    out.step_cycles = std::max(out.step_cycles, b.result.cycles);
    out.memory_cycles = std::max(out.memory_cycles, b.result.memory_cycles);
  }
  return out;
}

namespace {

json settings_json(const ExperimentConfig& cfg, uint64_t points) {
  return {{"hash_kind", grid::to_string(cfg.grid.hash_kind)},
          {"order", workload::to_string(cfg.workload.order)},
          {"register", cfg.workload.register_enabled ? "on" : "off"},
          {"mapping", mapping::to_string(cfg.mapping.subarray)},
          {"level_policy", mapping::to_string(cfg.mapping.level_policy)},
          {"strategy", parallelism::to_string(cfg.parallelism.strategy)},
          {"scene", workload::to_string(cfg.workload.scene)},
          {"scheduler", dram::to_string(cfg.timing.scheduler)},
          {"seed", cfg.workload.seed},
          {"points", points},
          {"fingerprint", fingerprint_hex(config_fingerprint(cfg))}};
}

HtMetrics ht_metrics(const ExperimentConfig& cfg, const StepOutcome& s) {
  HtMetrics m;
  m.points = s.meta.points;
  m.consumed_bytes = s.meta.consumed_bytes;
  m.memory_cycles = s.memory_cycles;
  for (const auto& b : s.banks)
    if (b.dram.requests > 0) ++m.banks_used;
  m.bank_conflicts = s.dram.bank_conflicts;
  m.row_hit_rate = s.dram.row_hit_rate();
  m.register_hit_rate =
      s.meta.entry_lookups ? double(s.meta.register_hits) / double(s.meta.entry_lookups) : 0.0;
  m.entry_requests = s.entry_requests;
  m.row_requests = s.coalesce.row_requests;
  m.row_requests_per_cube =
      s.meta.cube_lookups ? double(m.row_requests) / double(s.meta.cube_lookups) : 0.0;
  m.row_requests_per_fetched_cube = s.coalesce.requests_per_group();
  m.row_requests_per_point = m.points ? double(m.row_requests) / double(m.points) : 0.0;
  const double ext_bytes = double(m.entry_requests) * double(cfg.report.external_burst_bytes);
  m.external_io_cycles = uint64_t(std::ceil(ext_bytes / cfg.report.external_io_bytes_per_cycle));
  if (m.memory_cycles > 0) {
    dram::DramStats st;
    st.total_cycles = int64_t(m.memory_cycles);
    const auto bw = dram::peak_and_effective_bandwidth(st, m.consumed_bytes, cfg.geometry.row_bytes,
                                                       cfg.timing.params, std::max(m.banks_used, 1u));
    m.effective_bytes_per_cycle = bw.effective_bytes_per_cycle;
    m.peak_bytes_per_cycle = bw.peak_bytes_per_cycle;
    m.utilization = bw.utilization;
    m.delivered_over_external = double(m.external_io_cycles) / double(m.memory_cycles);
  }
  if (m.external_io_cycles > 0)
    m.external_io_bytes_per_cycle = double(m.consumed_bytes) / double(m.external_io_cycles);
  return m;
}

double energy_of(const ExperimentConfig& cfg, const ScenarioResult& r) {
  const auto& e = cfg.report.energy;
  double total = 0.0;
  for (size_t i = 0; i < 4; ++i) {
    const auto& s = r.steps[i];
    total += double(s.dram.activations) * e.activation + double(s.dram.bytes) * e.rw_byte;
    for (const auto& b : s.banks)
      total += double(b.result.compute_cycles) * double(cfg.engine.fp_lanes) * e.pe_op;
  }
  total += double(r.plan.total.total()) * e.interbank_byte;
  return total;
}

}  // namespace

ScenarioResult run_scenario(const ExperimentConfig& cfg, const std::string& name,
                            const workload::AccessTrace* ht_trace) {
  ScenarioResult r;
  r.name = name;
  const Prepared prep = Prepared::make(cfg);
  const uint64_t points = prep.stream.size();
  r.settings = settings_json(cfg, points);
  log::info("scenario " + name + ": " + std::to_string(points) + " points");

  const auto specs = parallelism::derive_step_specs(cfg.grid, cfg.mlp, points);
  parallelism::PlanOptions po;
  po.n_banks = cfg.geometry.total_banks();
  po.table_owners = uint32_t(prep.assignment.owners.size());
  po.grad_bytes = cfg.parallelism.grad_bytes;
  r.plan = parallelism::plan(cfg.parallelism.strategy, specs, po);
  const auto strat = parallelism::strategies_for(cfg.parallelism.strategy);

  r.steps[0] = run_table_step(prep, Kernel::HT, strat[0], ht_trace);
  r.steps[1] = run_mlp_step(prep, Kernel::MLP, strat[1]);
  r.steps[2] = run_mlp_step(prep, Kernel::MLP_b, strat[2]);
  r.steps[3] = run_table_step(prep, Kernel::HT_b, strat[3]);

  std::array<std::vector<uint64_t>, 4> cycles;
  for (size_t i = 0; i < 4; ++i) {
    cycles[i].assign(po.n_banks, 0);
    for (const auto& b : r.steps[i].banks) cycles[i][b.bank] = b.result.cycles;
  }
  r.iteration = parallelism::schedule_iteration(r.plan, cycles, cfg.parallelism.link_bytes_per_cycle);
  for (size_t i = 0; i < 4; ++i)
    if (r.iteration.steps[i].step_cycles != r.steps[i].step_cycles)
      throw InvariantViolation("step time differs from the slowest bank");
  const auto& L = r.plan.total;
  if (L.total() != L.cat1_duplication_bytes + L.cat2_interstep_bytes + L.cat3_intrastep_bytes +
                       L.cat4_gradient_reduce_bytes)
    throw InvariantViolation("ledger total differs from its categories");

  r.ht = ht_metrics(cfg, r.steps[0]);
  if (cfg.report.energy.enabled()) r.energy = energy_of(cfg, r);
  return r;
}

namespace {

json dram_json(const dram::DramStats& s) {
  return {{"requests", s.requests},
          {"reads", s.reads},
          {"writes", s.writes},
          {"row_hits", s.row_hits},
          {"row_misses", s.row_misses},
          {"bank_conflicts", s.bank_conflicts},
          {"subarray_switches", s.subarray_switches},
          {"activations", s.activations},
          {"precharges", s.precharges},
          {"refreshes", s.refreshes},
          {"bytes", s.bytes},
          {"total_cycles", s.total_cycles}};
}

json ledger_json(const parallelism::MovementLedger& l) {
  return {{"cat1_duplication_bytes", l.cat1_duplication_bytes},
          {"cat2_interstep_bytes", l.cat2_interstep_bytes},
          {"cat3_intrastep_bytes", l.cat3_intrastep_bytes},
          {"cat4_gradient_reduce_bytes", l.cat4_gradient_reduce_bytes},
          {"total_bytes", l.total()}};
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json scenario_to_json(const ScenarioResult& r) {
  json j;
  j["name"] = r.name;
  j["settings"] = r.settings;
  j["error"] = r.error.empty() ? json(nullptr) : json(r.error);
  if (!r.ok()) return j;
  const auto& h = r.ht;
  j["ht"] = {{"points", h.points},
             {"consumed_bytes", h.consumed_bytes},
             {"memory_cycles", h.memory_cycles},
             {"banks_used", h.banks_used},
             {"effective_bytes_per_cycle", h.effective_bytes_per_cycle},
             {"peak_bytes_per_cycle", h.peak_bytes_per_cycle},
             {"utilization", h.utilization},
             {"bank_conflicts", h.bank_conflicts},
             {"row_hit_rate", h.row_hit_rate},
             {"register_hit_rate", h.register_hit_rate},
             {"entry_requests", h.entry_requests},
             {"row_requests", h.row_requests},
             {"row_requests_per_cube", h.row_requests_per_cube},
             {"row_requests_per_fetched_cube", h.row_requests_per_fetched_cube},
             {"row_requests_per_point", h.row_requests_per_point},
             {"external_io_cycles", h.external_io_cycles},
             {"external_io_bytes_per_cycle", h.external_io_bytes_per_cycle},
             {"delivered_over_external", h.delivered_over_external}};
  json steps = json::array();
  for (size_t i = 0; i < 4; ++i) {
    const auto& s = r.steps[i];
    json banks = json::array();
    for (const auto& b : s.banks)
      banks.push_back({{"bank", b.bank},
                       {"points", b.points},
                       {"levels", b.levels},
                       {"cycles", b.result.cycles},
                       {"compute_cycles", b.result.compute_cycles},
                       {"memory_cycles", b.result.memory_cycles},
                       {"overlap", b.result.overlap},
                       {"fill", b.result.fill},
                       {"dram", dram_json(b.dram)}});
    steps.push_back({{"step", parallelism::to_string(s.step)},
                     {"strategy", parallelism::to_string(s.strategy)},
                     {"participants", r.plan.steps[i].participants},
                     {"step_cycles", s.step_cycles},
                     {"memory_cycles", s.memory_cycles},
                     {"movement_cycles", r.iteration.steps[i].movement_cycles},
                     {"requests", s.entry_requests},
                     {"dram", dram_json(s.dram)},
                     {"ledger", ledger_json(r.plan.steps[i].ledger)},
                     {"banks", banks}});
  }
  j["steps"] = steps;
  j["ledger"] = ledger_json(r.plan.total);
  j["iteration"] = {{"compute_memory_cycles", r.iteration.compute_memory_cycles},
                    {"movement_cycles", r.iteration.movement_cycles},
                    {"total_cycles", r.iteration.total_cycles}};
  j["energy"] = optional_json(r.energy);
  return j;
}

std::vector<SweepAxis> parse_axes(const std::string& spec) {
  static const std::vector<std::pair<std::string, std::vector<std::string>>> known{
      {"hash_kind", {"morton", "xor"}},
      {"order", {"ray_first", "random"}},
      {"mapping", {"rowmajor", "intra_level"}},
      {"strategy", {"heterogeneous", "pure_data", "pure_param"}},
      {"register", {"on", "off"}},
      {"scene", {"orbit", "forward", "object"}},
      {"scheduler", {"fcfs", "frfcfs"}},
      {"level_policy", {"all_one_bank", "grouped_balanced"}}};
  std::vector<SweepAxis> axes;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    SweepAxis a;
    const auto eq = item.find('=');
    a.key = item.substr(0, eq);
    auto it = std::find_if(known.begin(), known.end(), [&](const auto& k) { return k.first == a.key; });
    if (it == known.end()) throw ConfigError("unknown sweep axis '" + a.key + "'");
    if (eq == std::string::npos) {
      a.values = it->second;
    } else {
      std::stringstream vs(item.substr(eq + 1));
      std::string v;
      while (std::getline(vs, v, '|')) {
        if (std::find(it->second.begin(), it->second.end(), v) == it->second.end())
          throw ConfigError("axis '" + a.key + "' has no value '" + v + "'");
        a.values.push_back(v);
      }
      if (a.values.empty()) throw ConfigError("axis '" + a.key + "' lists no values");
    }
    for (const auto& other : axes)
      if (other.key == a.key) throw ConfigError("axis '" + a.key + "' given twice");
    axes.push_back(a);
  }
  if (axes.empty()) throw ConfigError("sweep needs at least one axis");
  return axes;
}

bool SweepResult::all_ok() const {
  return std::all_of(scenarios.begin(), scenarios.end(), [](const auto& s) { return s.ok(); });
}

namespace {

bool comparable(const ScenarioResult& a, const ScenarioResult& b) {
  if (!a.ok() || !b.ok()) return false;
  return a.ht.points == b.ht.points;
}

}  // namespace

SweepResult run_sweep(const ExperimentConfig& base, const std::vector<SweepAxis>& axes,
                      unsigned threads, bool reverse_execution) {
  std::vector<std::pair<std::string, ExperimentConfig>> plan{{"", base}};
  for (const auto& axis : axes) {
    std::vector<std::pair<std::string, ExperimentConfig>> next;
    for (const auto& [name, cfg] : plan)
      for (const auto& v : axis.values) {
        ExperimentConfig c = cfg;
        apply_override(c, axis.key, v);
        next.emplace_back(name.empty() ? axis.key + "=" + v : name + "," + axis.key + "=" + v, c);
      }
    plan = std::move(next);
  }

  SweepResult out;
  out.scenarios.resize(plan.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, unsigned(plan.size()));
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const size_t k = next.fetch_add(1);
      if (k >= plan.size()) return;
      const size_t i = reverse_execution ? plan.size() - 1 - k : k;
      try {
        out.scenarios[i] = run_scenario(plan[i].second, plan[i].first);
      } catch (const std::exception& e) {
        ScenarioResult failed;
        failed.name = plan[i].first;
        failed.settings = settings_json(plan[i].second, plan[i].second.batch_points());
        failed.error = e.what();
        out.scenarios[i] = std::move(failed);
        log::error("scenario " + plan[i].first + " failed: " + e.what());
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (size_t a = 0; a < out.scenarios.size(); ++a)
    for (size_t b = a + 1; b < out.scenarios.size(); ++b) {
      const auto& A = out.scenarios[a];
      const auto& B = out.scenarios[b];
      if (!comparable(A, B)) continue;
      RatioEntry e;
      e.a = a;
      e.b = b;
      e.effective_bandwidth =
          report::improvement_ratio(A.ht.effective_bytes_per_cycle, B.ht.effective_bytes_per_cycle);
      e.speedup = report::improvement_ratio(double(B.iteration.total_cycles),
                                            double(A.iteration.total_cycles));
      e.ledger = report::improvement_ratio(double(A.plan.total.total()), double(B.plan.total.total()));
      out.ratios.push_back(e);
    }
  return out;
}

json report_json(const ExperimentConfig& cfg, const std::vector<ScenarioResult>& scenarios,
                 const std::vector<RatioEntry>& ratios) {
  json j;
  j["schema_version"] = report::kSchemaVersion;
  j["fingerprint"] = fingerprint_hex(config_fingerprint(cfg));
  json c = config_to_json(cfg);
  c.erase("output");
  j["config"] = c;
  json sc = json::array();
  for (const auto& s : scenarios) sc.push_back(scenario_to_json(s));
  j["scenarios"] = sc;
  json rs = json::array();
  for (const auto& r : ratios)
    rs.push_back({{"a", scenarios[r.a].name},
                  {"b", scenarios[r.b].name},
                  {"effective_bandwidth", optional_json(r.effective_bandwidth)},
                  {"speedup", optional_json(r.speedup)},
                  {"ledger", optional_json(r.ledger)}});
  j["ratios"] = rs;
  return j;
}

namespace {

std::string csv_cell(const json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

const json& at_path(const json& j, std::initializer_list<const char*> path) {
  static const json null_value;
  const json* cur = &j;
  for (const char* k : path) {
    if (!cur->is_object() || !cur->contains(k)) return null_value;
    cur = &cur->at(k);
  }
  return *cur;
}

}  // namespace

std::string report_csv(const json& report) {
  std::ostringstream os;
  os << "fingerprint,scenario,hash_kind,order,register,mapping,level_policy,strategy,scene,"
        "scheduler,points,ht_memory_cycles,effective_bytes_per_cycle,peak_bytes_per_cycle,"
        "utilization,bank_conflicts,row_hit_rate,register_hit_rate,row_requests_per_cube,"
        "delivered_over_external,iteration_total_cycles,movement_cycles,ledger_total_bytes,error\n";
  const std::string fp = csv_cell(at_path(report, {"fingerprint"}));
  const json& scenarios = at_path(report, {"scenarios"});
  if (!scenarios.is_array()) throw ParseError("report has no scenarios array");
  for (const auto& s : scenarios) {
    os << fp << ',' << csv_cell(at_path(s, {"name"}));
    for (const char* k : {"hash_kind", "order", "register", "mapping", "level_policy", "strategy",
                          "scene", "scheduler", "points"})
      os << ',' << csv_cell(at_path(s, {"settings", k}));
    for (const char* k : {"memory_cycles", "effective_bytes_per_cycle", "peak_bytes_per_cycle",
                          "utilization", "bank_conflicts", "row_hit_rate", "register_hit_rate",
                          "row_requests_per_cube", "delivered_over_external"})
      os << ',' << csv_cell(at_path(s, {"ht", k}));
    os << ',' << csv_cell(at_path(s, {"iteration", "total_cycles"}));
    os << ',' << csv_cell(at_path(s, {"iteration", "movement_cycles"}));
    os << ',' << csv_cell(at_path(s, {"ledger", "total_bytes"}));
    std::string err = csv_cell(at_path(s, {"error"}));
    std::replace(err.begin(), err.end(), ',', ';');
    os << ',' << err << '\n';
  }
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string());
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

workload::AccessTrace generate_config_trace(const ExperimentConfig& cfg) {
  const Prepared prep = Prepared::make(cfg);
  workload::HtTraceOptions opts{cfg.workload.register_enabled, cfg.workload.register_capacity,
                                Kernel::HT};
  return workload::generate_ht_trace(prep.stream, cfg.grid, prep.layout, opts);
}

namespace {

std::filesystem::path sidecar_of(const std::filesystem::path& trace) {
  return trace.string() + ".json";
}

}  // namespace

TraceSummary cmd_trace(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  const auto trace = generate_config_trace(cfg);
  TraceSummary s;
  s.points = trace.meta.points;
  s.requests = trace.requests.size();
  s.bytes = trace.total_bytes();
  s.upper_bound_requests = trace.meta.points * trace.meta.levels * 8;
  if (s.points == 0) log::warn("batch is empty; writing an empty trace");
  if (s.requests > s.upper_bound_requests)
    throw InvariantViolation("trace exceeds the points x levels x 8 request bound");

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create directory " + out_dir.string());
  s.trace_path = out_dir / "trace.bin";
  s.meta_path = sidecar_of(s.trace_path);
  workload::write_trace_binary(s.trace_path, trace.requests);
  json meta = {{"schema_version", report::kSchemaVersion},
               {"fingerprint", fingerprint_hex(config_fingerprint(cfg))},
               {"kernel", "HT"},
               {"points", s.points},
               {"levels", trace.meta.levels},
               {"requests", s.requests},
               {"bytes", s.bytes},
               {"register_hits", trace.meta.register_hits},
               {"hash_kind", grid::to_string(cfg.grid.hash_kind)},
               {"order", workload::to_string(cfg.workload.order)},
               {"register", cfg.workload.register_enabled}};
  write_text(s.meta_path, meta.dump(2) + "\n");
  if (cfg.output.trace_csv) workload::write_trace_csv(out_dir / "trace.csv", trace.requests);
  return s;
}

workload::AccessTrace load_trace_for(const ExperimentConfig& cfg,
                                     const std::filesystem::path& trace_path) {
  json meta;
  try {
    meta = json::parse(read_text(sidecar_of(trace_path)));
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("trace sidecar: ") + e.what());
  }
  const std::string want = fingerprint_hex(config_fingerprint(cfg));
  const std::string have = meta.value("fingerprint", std::string());
  if (have != want)
    throw ConfigError("trace fingerprint " + have + " does not match config fingerprint " + want);
  workload::AccessTrace t;
  t.requests = workload::read_trace_binary(trace_path);
  if (meta.value("requests", uint64_t{0}) != t.requests.size())
    throw ParseError("trace record count differs from its sidecar");
  t.meta.points = meta.value("points", uint64_t{0});
  t.meta.levels = meta.value("levels", uint32_t{0});
  t.meta.register_hits = meta.value("register_hits", uint64_t{0});
  return t;
}

json cmd_sim(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
             const std::string& scenario_name,
             const std::optional<std::filesystem::path>& trace_path) {
  workload::AccessTrace loaded;
  if (trace_path) loaded = load_trace_for(cfg, *trace_path);
  ScenarioResult r = run_scenario(cfg, scenario_name, trace_path ? &loaded : nullptr);
  json rep = report_json(cfg, {r}, {});
  write_text(out_dir / "report.json", rep.dump(2) + "\n");
  write_text(out_dir / "report.csv", report_csv(rep));
  if (cfg.output.command_log) {
    const Prepared prep = Prepared::make(cfg);
    workload::HtTraceOptions opts{cfg.workload.register_enabled, cfg.workload.register_capacity,
                                  Kernel::HT};
    const auto raw = trace_path ? loaded
                                : workload::generate_ht_trace(prep.stream, cfg.grid, prep.layout, opts);
    const auto co = workload::coalesce_to_rows(raw, cfg.geometry.row_bytes);
    auto so = service_options(cfg);
    so.log_commands = true;
    const auto svc = dram::service_trace(co.trace.requests, *prep.map, cfg.timing.params, so);
    write_text(out_dir / "commands.csv", dram::command_log_csv(svc.log));
  }
  return rep;
}

json cmd_sweep(const ExperimentConfig& cfg, const std::vector<SweepAxis>& axes,
               const std::filesystem::path& out_dir, bool& ok, unsigned threads) {
  const auto res = run_sweep(cfg, axes, threads);
  ok = res.all_ok();
  json rep = report_json(cfg, res.scenarios, res.ratios);
  write_text(out_dir / "sweep_report.json", rep.dump(2) + "\n");
  write_text(out_dir / "sweep_report.csv", report_csv(rep));
  return rep;
}

json cmd_report(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                const std::optional<std::filesystem::path>& report_path) {
  json summary;
  summary["fingerprint"] = fingerprint_hex(config_fingerprint(cfg));
  const auto mode = cfg.report.histogram_pairs;
  const auto hm = report::neighbor_distance_histogram(cfg.grid, grid::HashKind::Morton,
                                                      cfg.report.histogram_samples,
                                                      cfg.workload.seed, mode);
  const auto hx = report::neighbor_distance_histogram(cfg.grid, grid::HashKind::XorSpatial,
                                                      cfg.report.histogram_samples,
                                                      cfg.workload.seed, mode);
  write_text(out_dir / "histogram.csv", report::histogram_csv(hm, hx));
  summary["histogram"] = {{"pairs", to_string(mode)},
                          {"samples", cfg.report.histogram_samples},
                          {"morton", {hm.fraction(0), hm.fraction(1), hm.fraction(2)}},
                          {"xor", {hx.fraction(0), hx.fraction(1), hx.fraction(2)}}};

  const auto specs = parallelism::derive_step_specs(cfg.grid, cfg.mlp, cfg.batch_points());
  const auto assignment = mapping::assign_levels_to_banks(cfg.grid.levels, cfg.geometry,
                                                          cfg.mapping.level_policy, cfg.mapping.groups);
  parallelism::PlanOptions po;
  po.n_banks = cfg.geometry.total_banks();
  po.table_owners = uint32_t(assignment.owners.size());
  po.grad_bytes = cfg.parallelism.grad_bytes;
  std::ostringstream ledger_csv;
  ledger_csv << "strategy,step,cat1,cat2,cat3,cat4,total\n";
  json ledgers = json::object();
  for (auto kind : {parallelism::PlanKind::Heterogeneous, parallelism::PlanKind::PureData,
                    parallelism::PlanKind::PureParameter}) {
    const auto p = parallelism::plan(kind, specs, po);
    for (const auto& s : p.steps)
      ledger_csv << parallelism::to_string(kind) << ',' << parallelism::to_string(s.step) << ','
                 << s.ledger.cat1_duplication_bytes << ',' << s.ledger.cat2_interstep_bytes << ','
                 << s.ledger.cat3_intrastep_bytes << ',' << s.ledger.cat4_gradient_reduce_bytes
                 << ',' << s.ledger.total() << '\n';
    ledgers[parallelism::to_string(kind)] = ledger_json(p.total);
  }
  write_text(out_dir / "ledger.csv", ledger_csv.str());
  summary["ledger"] = ledgers;

  if (report_path) {
    json rep;
    try {
      rep = json::parse(read_text(*report_path));
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("report: ") + e.what());
    }
    write_text(out_dir / "report.csv", report_csv(rep));
    summary["converted"] = report_path->string();
  }
  write_text(out_dir / "summary.json", summary.dump(2) + "\n");
  return summary;
}

}  // namespace nmpnerf::experiment
