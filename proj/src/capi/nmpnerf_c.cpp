#include "nmpnerf/nmpnerf.h"

#include <cstring>
#include <exception>
#include <optional>
#include <string>

#include "config.hpp"
#include "error.hpp"
#include "experiment.hpp"
#include "hashgrid.hpp"
#include "mapping.hpp"
#include "nerf_ref.hpp"
#include "parallelism.hpp"
#include "workload.hpp"

struct nmp_config {
  nmpnerf::ExperimentConfig cfg;
};

struct nmp_trace {
  std::vector<nmpnerf::workload::MemoryRequest> requests;
};

namespace {

thread_local std::string g_last_error;

nmp_status fail(nmp_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <typename F>
nmp_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return NMP_OK;
  } catch (const nmpnerf::Error& e) {
    return fail(static_cast<nmp_status>(e.code()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(NMP_ERR_PARSE, e.what());
  } catch (const std::bad_alloc&) {
    return fail(NMP_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(NMP_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(NMP_ERR_INTERNAL, "unknown exception");
  }
}

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.data(), s.size() + 1);
  return p;
}

void emit(char** out, const nlohmann::json& j) {
  if (out) *out = dup_string(j.dump(2));
}

void require(const void* p, const char* what) {
  if (!p) throw nmpnerf::Error(nmpnerf::ErrorCode::Argument, std::string(what) + " is null");
}

nmpnerf::grid::VertexCoord vertex(uint32_t x, uint32_t y, uint32_t z) {
  nmpnerf::grid::VertexCoord v;
  v.v = {x, y, z};
  return v;
}

}  // namespace

extern "C" {

const char* nmp_version(void) { return "0.1.0"; }

const char* nmp_last_error(void) { return g_last_error.c_str(); }

void nmp_string_free(char* s) { std::free(s); }

nmp_status nmp_config_default(nmp_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new nmp_config{};
  });
}

nmp_status nmp_config_load(const char* path, nmp_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto c = nmpnerf::load_config(path);
    *out = new nmp_config{std::move(c)};
  });
}

nmp_status nmp_config_parse(const char* text, nmp_config** out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    auto c = nmpnerf::parse_config(text);
    *out = new nmp_config{std::move(c)};
  });
}

void nmp_config_free(nmp_config* cfg) { delete cfg; }

nmp_status nmp_config_set_seed(nmp_config* cfg, uint64_t seed) {
  return guarded([&] {
    require(cfg, "cfg");
    cfg->cfg.workload.seed = seed;
  });
}

nmp_status nmp_config_apply_scenario(nmp_config* cfg, const char* scenario) {
  return guarded([&] {
    require(cfg, "cfg");
    require(scenario, "scenario");
    auto copy = cfg->cfg;
    nmpnerf::apply_scenario(copy, scenario);
    copy.validate();
    cfg->cfg = std::move(copy);
  });
}

nmp_status nmp_config_fingerprint(const nmp_config* cfg, uint64_t* out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    *out = nmpnerf::config_fingerprint(cfg->cfg);
  });
}

nmp_status nmp_config_to_json(const nmp_config* cfg, char** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    emit(out, nmpnerf::config_to_json(cfg->cfg));
  });
}

nmp_status nmp_config_output_dir(const nmp_config* cfg, char** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    *out = dup_string(cfg->cfg.output.dir);
  });
}

nmp_status nmp_trace_generate(const nmp_config* cfg, nmp_trace** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    auto t = nmpnerf::experiment::generate_config_trace(cfg->cfg);
    *out = new nmp_trace{std::move(t.requests)};
  });
}

nmp_status nmp_trace_read(const char* path, nmp_trace** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto r = nmpnerf::workload::read_trace_binary(path);
    *out = new nmp_trace{std::move(r)};
  });
}

nmp_status nmp_trace_write(const nmp_trace* trace, const char* path) {
  return guarded([&] {
    require(trace, "trace");
    require(path, "path");
    nmpnerf::workload::write_trace_binary(path, trace->requests);
  });
}

nmp_status nmp_trace_write_csv(const nmp_trace* trace, const char* path) {
  return guarded([&] {
    require(trace, "trace");
    require(path, "path");
    nmpnerf::workload::write_trace_csv(path, trace->requests);
  });
}

size_t nmp_trace_size(const nmp_trace* trace) { return trace ? trace->requests.size() : 0; }

nmp_status nmp_trace_get(const nmp_trace* trace, size_t index, nmp_request* out) {
  return guarded([&] {
    require(trace, "trace");
    require(out, "out");
    if (index >= trace->requests.size())
      throw nmpnerf::Error(nmpnerf::ErrorCode::Argument, "trace index out of range");
    const auto& r = trace->requests[index];
    out->id = r.id;
    out->kind = static_cast<uint8_t>(r.kind);
    out->address = r.address;
    out->size = r.size;
    out->kernel = static_cast<uint8_t>(r.kernel);
    out->order = r.order;
  });
}

void nmp_trace_free(nmp_trace* trace) { delete trace; }

nmp_status nmp_cmd_trace(const nmp_config* cfg, const char* out_dir, char** summary) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out_dir, "out_dir");
    const auto s = nmpnerf::experiment::cmd_trace(cfg->cfg, out_dir);
    emit(summary, {{"points", s.points},
                   {"requests", s.requests},
                   {"bytes", s.bytes},
                   {"upper_bound_requests", s.upper_bound_requests},
                   {"trace", s.trace_path.string()},
                   {"metadata", s.meta_path.string()},
                   {"fingerprint", nmpnerf::fingerprint_hex(nmpnerf::config_fingerprint(cfg->cfg))}});
  });
}

nmp_status nmp_cmd_sim(const nmp_config* cfg, const char* out_dir, const char* scenario,
                       const char* trace_path, char** summary) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out_dir, "out_dir");
    std::optional<std::filesystem::path> tp;
    if (trace_path && *trace_path) tp = trace_path;
    const auto rep = nmpnerf::experiment::cmd_sim(cfg->cfg, out_dir,
                                                  scenario && *scenario ? scenario : "default", tp);
    emit(summary, rep);
  });
}

nmp_status nmp_cmd_sweep(const nmp_config* cfg, const char* axes, const char* out_dir,
                         unsigned threads, char** summary) {
  bool ok = true;
  const nmp_status s = guarded([&] {
    require(cfg, "cfg");
    require(axes, "axes");
    require(out_dir, "out_dir");
    const auto parsed = nmpnerf::experiment::parse_axes(axes);
    const auto rep = nmpnerf::experiment::cmd_sweep(cfg->cfg, parsed, out_dir, ok, threads);
    emit(summary, rep);
  });
  if (s == NMP_OK && !ok) return fail(NMP_ERR_INVARIANT, "one or more sweep scenarios failed");
  return s;
}

nmp_status nmp_cmd_report(const nmp_config* cfg, const char* out_dir, const char* report_path,
                          char** summary) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out_dir, "out_dir");
    std::optional<std::filesystem::path> rp;
    if (report_path && *report_path) rp = report_path;
    emit(summary, nmpnerf::experiment::cmd_report(cfg->cfg, out_dir, rp));
  });
}

nmp_status nmp_morton_expand(uint32_t x, uint64_t* out) {
  return guarded([&] {
    require(out, "out");
    *out = nmpnerf::grid::morton_expand(x);
  });
}

nmp_status nmp_morton_hash(uint32_t x, uint32_t y, uint32_t z, uint64_t table_size, uint64_t* out) {
  return guarded([&] {
    require(out, "out");
    *out = nmpnerf::grid::morton_hash(vertex(x, y, z), table_size);
  });
}

nmp_status nmp_xor_hash(uint32_t x, uint32_t y, uint32_t z, uint64_t table_size, uint64_t* out) {
  return guarded([&] {
    require(out, "out");
    *out = nmpnerf::grid::xor_hash(vertex(x, y, z), table_size);
  });
}

nmp_status nmp_step_specs(const nmp_config* cfg, uint64_t points, nmp_step_spec out[4]) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    const auto specs = nmpnerf::parallelism::derive_step_specs(cfg->cfg.grid, cfg->cfg.mlp, points);
    for (size_t i = 0; i < 4; ++i)
      out[i] = {specs[i].param_bytes, specs[i].param_elements, specs[i].input_bytes,
                specs[i].output_bytes, specs[i].intermediate_bytes};
  });
}

nmp_status nmp_plan_ledger(const nmp_config* cfg, uint64_t points, nmp_plan_kind kind,
                           nmp_ledger* out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    namespace par = nmpnerf::parallelism;
    const auto& c = cfg->cfg;
    par::PlanKind k;
    switch (kind) {
      case NMP_PLAN_HETEROGENEOUS: k = par::PlanKind::Heterogeneous; break;
      case NMP_PLAN_PURE_DATA: k = par::PlanKind::PureData; break;
      case NMP_PLAN_PURE_PARAM: k = par::PlanKind::PureParameter; break;
      default: throw nmpnerf::Error(nmpnerf::ErrorCode::Argument, "unknown plan kind");
    }
    const auto assignment = nmpnerf::mapping::assign_levels_to_banks(
        c.grid.levels, c.geometry, c.mapping.level_policy, c.mapping.groups);
    par::PlanOptions po;
    po.n_banks = c.geometry.total_banks();
    po.table_owners = static_cast<uint32_t>(assignment.owners.size());
    po.grad_bytes = c.parallelism.grad_bytes;
    const auto p = par::plan(k, par::derive_step_specs(c.grid, c.mlp, points), po);
    *out = {p.total.cat1_duplication_bytes, p.total.cat2_interstep_bytes,
            p.total.cat3_intrastep_bytes, p.total.cat4_gradient_reduce_bytes, p.total.total()};
  });
}

nmp_status nmp_toy_train(uint64_t seed, int steps, double learning_rate, double* losses) {
  return guarded([&] {
    if (steps < 0) throw nmpnerf::Error(nmpnerf::ErrorCode::Argument, "steps must be >= 0");
    if (steps > 0) require(losses, "losses");
    namespace nerf = nmpnerf::nerf;
    auto state = nerf::ModelState::create(nerf::toy_grid(), nerf::MlpConfig{}, seed);
    const auto batch = nerf::toy_scene(4, 16, seed);
    for (int i = 0; i < steps; ++i) losses[i] = nerf::train_step(batch, state, learning_rate);
  });
}

}  // extern "C"
