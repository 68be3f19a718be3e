#include "config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "error.hpp"

namespace nmpnerf {

using nlohmann::json;

const char* to_string(HistogramPairs p) {
  return p == HistogramPairs::TableNeighbors ? "table_neighbors" : "lattice_edges";
}

HistogramPairs histogram_pairs_from_string(std::string_view name) {
  if (name == "table_neighbors") return HistogramPairs::TableNeighbors;
  if (name == "lattice_edges") return HistogramPairs::LatticeEdges;
  throw ConfigError("unknown histogram pair mode '" + std::string(name) +
                    "' (expected table_neighbors|lattice_edges)");
}

namespace {

class Section {
 public:
  Section(const json& parent, const std::string& name) : name_(name) {
    if (!parent.contains(name)) return;
    node_ = &parent.at(name);
    if (!node_->is_object()) throw ConfigError("section '" + name + "' must be an object");
  }

  template <class T>
  void read(const char* key, T& out) {
    known_.insert(key);
    if (!node_ || !node_->contains(key)) return;
    const json& v = node_->at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError("");
        if (std::is_unsigned_v<T> && !v.is_number_unsigned()) throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError("");
      }
      out = v.get<T>();
    } catch (const std::exception&) {
      throw ConfigError(name_ + "." + key + ": wrong type (got " + std::string(v.type_name()) + ")");
    }
  }

  template <class E, class Parse>
  void read_enum(const char* key, E& out, Parse parse) {
    std::string s;
    bool present = node_ && node_->contains(key);
    read(key, s);
    if (present) out = parse(s);
  }

  const json* raw(const char* key) {
    known_.insert(key);
    if (!node_ || !node_->contains(key)) return nullptr;
    return &node_->at(key);
  }

  void finish() const {
    if (!node_) return;
    for (auto it = node_->begin(); it != node_->end(); ++it)
      if (!known_.count(it.key()))
        throw ConfigError("unknown key '" + name_ + "." + it.key() + "'");
  }

 private:
  std::string name_;
  const json* node_ = nullptr;
  std::set<std::string> known_;
};

const std::set<std::string> kSections{"grid",    "mlp",     "workload",    "geometry",
                                      "timing",  "engine",  "mapping",     "parallelism",
                                      "report",  "output"};

}  // namespace

void ExperimentConfig::validate() const {
  grid.validate();
  mlp.validate();
  geometry.validate();
  timing.params.validate();
  engine.validate(geometry.row_bytes);
  if (workload.rays < 0) throw ConfigError("workload.rays must be >= 0");
  if (workload.samples_per_ray < 1) throw ConfigError("workload.samples_per_ray must be >= 1");
  if (workload.register_capacity < 1) throw ConfigError("workload.register_capacity must be >= 1");
  if (timing.window < 1) throw ConfigError("timing.window must be >= 1");
  if (!(parallelism.link_bytes_per_cycle > 0))
    throw ConfigError("parallelism.link_bytes_per_cycle must be > 0");
  if (parallelism.grad_bytes < 1) throw ConfigError("parallelism.grad_bytes must be >= 1");
  if (!(report.external_io_bytes_per_cycle > 0))
    throw ConfigError("report.external_io_bytes_per_cycle must be > 0");
  if (report.external_burst_bytes < 1) throw ConfigError("report.external_burst_bytes must be >= 1");
  // Surfaces grouping and capacity problems before any run.
  const auto levels = grid.level_configs();
  auto assignment = mapping::assign_levels_to_banks(grid.levels, geometry, mapping.level_policy,
                                                    mapping.groups);
  auto layout = workload::TableLayout::make(levels, grid.entry_bytes(), geometry.row_bytes);
  mapping::AddressMap check(geometry, layout, assignment, mapping.subarray);
  (void)check;
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config root must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!kSections.count(it.key())) throw ConfigError("unknown section '" + it.key() + "'");

  ExperimentConfig c;
  {
    Section s(j, "grid");
    s.read("levels", c.grid.levels);
    int log2_table = 19;
    s.read("log2_table_size", log2_table);
    if (log2_table < 1 || log2_table > 40) throw ConfigError("grid.log2_table_size out of range");
    c.grid.table_size = uint64_t{1} << log2_table;
    s.read("feature_dim", c.grid.feature_dim);
    s.read("bytes_per_feature", c.grid.bytes_per_feature);
    s.read("base_resolution", c.grid.base_resolution);
    s.read("max_resolution", c.grid.max_resolution);
    s.read_enum("hash", c.grid.hash_kind, grid::hash_kind_from_string);
    if (const json* p = s.raw("primes")) {
      auto prime = [&](size_t i) {
        const json& v = (*p)[i];
        if (!v.is_number_unsigned() || v.get<uint64_t>() > UINT32_MAX)
          throw ConfigError("grid.primes must be 3 unsigned 32-bit integers");
        return v.get<uint32_t>();
      };
      if (!p->is_array() || p->size() != 3) throw ConfigError("grid.primes must be 3 integers");
      c.grid.primes = {prime(0), prime(1), prime(2)};
    }
    s.finish();
  }
  {
    Section s(j, "mlp");
    s.read("density_hidden", c.mlp.density_hidden);
    s.read("geo_features", c.mlp.geo_features);
    s.read("view_dims", c.mlp.view_dims);
    s.read("color_hidden", c.mlp.color_hidden);
    s.read("color_hidden_layers", c.mlp.color_hidden_layers);
    s.read("out_dims", c.mlp.out_dims);
    s.finish();
  }
  {
    Section s(j, "workload");
    s.read_enum("scene", c.workload.scene, workload::scene_kind_from_string);
    s.read("rays", c.workload.rays);
    s.read("samples_per_ray", c.workload.samples_per_ray);
    s.read_enum("order", c.workload.order, workload::stream_order_from_string);
    s.read("seed", c.workload.seed);
    s.read("register", c.workload.register_enabled);
    s.read("register_capacity", c.workload.register_capacity);
    s.finish();
  }
  {
    Section s(j, "geometry");
    s.read("channels", c.geometry.channels);
    s.read("ranks_per_channel", c.geometry.ranks_per_channel);
    s.read("banks_per_chip", c.geometry.banks_per_chip);
    s.read("subarrays_per_bank", c.geometry.subarrays_per_bank);
    s.read("row_bytes", c.geometry.row_bytes);
    s.read("rows_per_subarray", c.geometry.rows_per_subarray);
    s.finish();
  }
  {
    Section s(j, "timing");
    auto& t = c.timing.params;
    s.read("tCL", t.tCL);
    s.read("tRCD", t.tRCD);
    s.read("tRPpb", t.tRPpb);
    s.read("tRAS", t.tRAS);
    s.read("tCCD", t.tCCD);
    s.read("tRRD", t.tRRD);
    s.read("tFAW", t.tFAW);
    s.read("tWR", t.tWR);
    s.read("tRA", t.tRA);
    s.read("tWA", t.tWA);
    s.read("row_transfer", t.row_transfer);
    s.read("refresh", t.refresh);
    s.read("tREFI", t.tREFI);
    s.read("tRFC", t.tRFC);
    s.read_enum("scheduler", c.timing.scheduler, dram::scheduler_from_string);
    s.read("window", c.timing.window);
    s.finish();
  }
  {
    Section s(j, "engine");
    auto& e = c.engine;
    s.read("int_lanes", e.int_lanes);
    s.read("fp_lanes", e.fp_lanes);
    s.read("scratchpad_bytes", e.scratchpad_bytes);
    s.read("clock_mhz", e.clock_mhz);
    s.read("hash_register_count", e.hash_register_count);
    s.read("setup_cycles", e.setup_cycles);
    s.read("hash_cost_morton", e.hash_cost_morton);
    s.read("hash_cost_xor", e.hash_cost_xor);
    s.read("interp_combine_ops", e.interp_combine_ops);
    s.read("ht_tile_points", e.ht_tile_points);
    s.read("mlp_tile_points", e.mlp_tile_points);
    s.finish();
  }
  {
    Section s(j, "mapping");
    s.read_enum("subarray", c.mapping.subarray, mapping::subarray_mapping_from_string);
    s.read_enum("levels", c.mapping.level_policy, mapping::level_policy_from_string);
    if (const json* g = s.raw("groups")) {
      try {
        c.mapping.groups = g->get<std::vector<std::vector<int>>>();
      } catch (const std::exception&) {
        throw ConfigError("mapping.groups must be a list of integer lists");
      }
    }
    s.finish();
  }
  {
    Section s(j, "parallelism");
    s.read_enum("strategy", c.parallelism.strategy, parallelism::plan_kind_from_string);
    s.read("link_bytes_per_cycle", c.parallelism.link_bytes_per_cycle);
    s.read("grad_bytes", c.parallelism.grad_bytes);
    s.finish();
  }
  {
    Section s(j, "report");
    s.read("histogram_samples", c.report.histogram_samples);
    s.read_enum("histogram_pairs", c.report.histogram_pairs, histogram_pairs_from_string);
    s.read("external_io_bytes_per_cycle", c.report.external_io_bytes_per_cycle);
    s.read("external_burst_bytes", c.report.external_burst_bytes);
    if (const json* e = s.raw("energy")) {
      const json wrapper{{"energy", *e}};
      Section es(wrapper, "energy");
      es.read("activation", c.report.energy.activation);
      es.read("rw_byte", c.report.energy.rw_byte);
      es.read("pe_op", c.report.energy.pe_op);
      es.read("interbank_byte", c.report.energy.interbank_byte);
      es.finish();
    }
    s.finish();
  }
  {
    Section s(j, "output");
    s.read("dir", c.output.dir);
    s.read("trace_csv", c.output.trace_csv);
    s.read("command_log", c.output.command_log);
    s.finish();
  }
  c.validate();
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  int log2_table = 0;
  while ((uint64_t{1} << log2_table) < c.grid.table_size) ++log2_table;
  j["grid"] = {{"levels", c.grid.levels},
               {"log2_table_size", log2_table},
               {"feature_dim", c.grid.feature_dim},
               {"bytes_per_feature", c.grid.bytes_per_feature},
               {"base_resolution", c.grid.base_resolution},
               {"max_resolution", c.grid.max_resolution},
               {"hash", grid::to_string(c.grid.hash_kind)},
               {"primes", {c.grid.primes.p0, c.grid.primes.p1, c.grid.primes.p2}}};
  j["mlp"] = {{"density_hidden", c.mlp.density_hidden},
              {"geo_features", c.mlp.geo_features},
              {"view_dims", c.mlp.view_dims},
              {"color_hidden", c.mlp.color_hidden},
              {"color_hidden_layers", c.mlp.color_hidden_layers},
              {"out_dims", c.mlp.out_dims}};
  j["workload"] = {{"scene", workload::to_string(c.workload.scene)},
                   {"rays", c.workload.rays},
                   {"samples_per_ray", c.workload.samples_per_ray},
                   {"order", workload::to_string(c.workload.order)},
                   {"seed", c.workload.seed},
                   {"register", c.workload.register_enabled},
                   {"register_capacity", c.workload.register_capacity}};
  j["geometry"] = {{"channels", c.geometry.channels},
                   {"ranks_per_channel", c.geometry.ranks_per_channel},
                   {"banks_per_chip", c.geometry.banks_per_chip},
                   {"subarrays_per_bank", c.geometry.subarrays_per_bank},
                   {"row_bytes", c.geometry.row_bytes},
                   {"rows_per_subarray", c.geometry.rows_per_subarray}};
  const auto& t = c.timing.params;
  j["timing"] = {{"tCL", t.tCL},     {"tRCD", t.tRCD},   {"tRPpb", t.tRPpb},
                 {"tRAS", t.tRAS},   {"tCCD", t.tCCD},   {"tRRD", t.tRRD},
                 {"tFAW", t.tFAW},   {"tWR", t.tWR},     {"tRA", t.tRA},
                 {"tWA", t.tWA},     {"row_transfer", t.row_transfer},
                 {"refresh", t.refresh}, {"tREFI", t.tREFI}, {"tRFC", t.tRFC},
                 {"scheduler", dram::to_string(c.timing.scheduler)},
                 {"window", c.timing.window}};
  const auto& e = c.engine;
  j["engine"] = {{"int_lanes", e.int_lanes},
                 {"fp_lanes", e.fp_lanes},
                 {"scratchpad_bytes", e.scratchpad_bytes},
                 {"clock_mhz", e.clock_mhz},
                 {"hash_register_count", e.hash_register_count},
                 {"setup_cycles", e.setup_cycles},
                 {"hash_cost_morton", e.hash_cost_morton},
                 {"hash_cost_xor", e.hash_cost_xor},
                 {"interp_combine_ops", e.interp_combine_ops},
                 {"ht_tile_points", e.ht_tile_points},
                 {"mlp_tile_points", e.mlp_tile_points}};
  j["mapping"] = {{"subarray", mapping::to_string(c.mapping.subarray)},
                  {"levels", mapping::to_string(c.mapping.level_policy)},
                  {"groups", c.mapping.groups}};
  j["parallelism"] = {{"strategy", parallelism::to_string(c.parallelism.strategy)},
                      {"link_bytes_per_cycle", c.parallelism.link_bytes_per_cycle},
                      {"grad_bytes", c.parallelism.grad_bytes}};
  j["report"] = {{"histogram_samples", c.report.histogram_samples},
                 {"histogram_pairs", to_string(c.report.histogram_pairs)},
                 {"external_io_bytes_per_cycle", c.report.external_io_bytes_per_cycle},
                 {"external_burst_bytes", c.report.external_burst_bytes},
                 {"energy",
                  {{"activation", c.report.energy.activation},
                   {"rw_byte", c.report.energy.rw_byte},
                   {"pe_op", c.report.energy.pe_op},
                   {"interbank_byte", c.report.energy.interbank_byte}}}};
  j["output"] = {{"dir", c.output.dir},
                 {"trace_csv", c.output.trace_csv},
                 {"command_log", c.output.command_log}};
  return j;
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config parse error: ") + e.what());
  }
  return config_from_json(j);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

uint64_t fnv1a64(std::string_view bytes) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

uint64_t config_fingerprint(const ExperimentConfig& cfg) {
  json j = config_to_json(cfg);
  j.erase("output");
  return fnv1a64(j.dump());
}

std::string fingerprint_hex(uint64_t fp) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fp));
  return buf;
}

void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "hash_kind" || key == "hash") {
    cfg.grid.hash_kind = grid::hash_kind_from_string(value);
  } else if (key == "order") {
    cfg.workload.order = workload::stream_order_from_string(value);
  } else if (key == "mapping") {
    cfg.mapping.subarray = mapping::subarray_mapping_from_string(value);
  } else if (key == "level_policy") {
    cfg.mapping.level_policy = mapping::level_policy_from_string(value);
  } else if (key == "strategy") {
    cfg.parallelism.strategy = parallelism::plan_kind_from_string(value);
  } else if (key == "register") {
    if (value == "on") cfg.workload.register_enabled = true;
    else if (value == "off") cfg.workload.register_enabled = false;
    else throw ConfigError("register must be on|off");
  } else if (key == "scene") {
    cfg.workload.scene = workload::scene_kind_from_string(value);
  } else if (key == "scheduler") {
    cfg.timing.scheduler = dram::scheduler_from_string(value);
  } else if (key == "seed") {
    try {
      size_t used = 0;
      cfg.workload.seed = std::stoull(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw ConfigError("seed must be a non-negative integer");
    }
  } else {
    throw ConfigError("unknown scenario key '" + key + "'");
  }
}

namespace {

bool apply_preset(ExperimentConfig& cfg, const std::string& name) {
  if (name == "proposed") {
    cfg.grid.hash_kind = grid::HashKind::Morton;
    cfg.workload.order = workload::StreamOrder::RayFirst;
    cfg.workload.register_enabled = true;
    cfg.mapping.subarray = mapping::SubarrayMapping::IntraLevel;
    cfg.mapping.level_policy = mapping::LevelPolicy::GroupedBalanced;
    cfg.parallelism.strategy = parallelism::PlanKind::Heterogeneous;
    return true;
  }
  if (name == "baseline") {
    cfg.grid.hash_kind = grid::HashKind::XorSpatial;
    cfg.workload.order = workload::StreamOrder::RandomShuffle;
    cfg.workload.register_enabled = false;
    cfg.mapping.subarray = mapping::SubarrayMapping::RowMajor;
    cfg.mapping.level_policy = mapping::LevelPolicy::GroupedBalanced;
    cfg.parallelism.strategy = parallelism::PlanKind::Heterogeneous;
    return true;
  }
  return false;
}

}  // namespace

void apply_scenario(ExperimentConfig& cfg, const std::string& scenario) {
  std::stringstream ss(scenario);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      if (!apply_preset(cfg, item))
        throw ConfigError("scenario '" + scenario + "': unknown preset '" + item + "'");
      continue;
    }
    apply_override(cfg, item.substr(0, eq), item.substr(eq + 1));
  }
}

}  // namespace nmpnerf
