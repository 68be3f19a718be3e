// nmpnerf: trace generation, simulation, sweeps and reports.
//
// Exit codes: 0 success, 1 invariant violation, 2 config error, 3 I/O error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "nmpnerf/nmpnerf.h"

namespace {

int exit_code(nmp_status s) {
  switch (s) {
    case NMP_OK: return 0;
    case NMP_ERR_INVARIANT:
    case NMP_ERR_INTERNAL: return 1;
    case NMP_ERR_CONFIG:
    case NMP_ERR_DOMAIN:
    case NMP_ERR_ARGUMENT: return 2;
    case NMP_ERR_IO:
    case NMP_ERR_PARSE: return 3;
  }
  return 1;
}

const char* status_name(nmp_status s) {
  switch (s) {
    case NMP_OK: return "ok";
    case NMP_ERR_INVARIANT: return "invariant violation";
    case NMP_ERR_CONFIG: return "config error";
    case NMP_ERR_IO: return "I/O error";
    case NMP_ERR_PARSE: return "parse error";
    case NMP_ERR_DOMAIN: return "domain error";
    case NMP_ERR_ARGUMENT: return "argument error";
    case NMP_ERR_INTERNAL: return "internal error";
  }
  return "error";
}

struct Failure {
  nmp_status status;
};

void check(nmp_status s) {
  if (s != NMP_OK) throw Failure{s};
}

class Config {
 public:
  Config(const std::string& path, std::optional<uint64_t> seed, const std::string& scenario) {
    check(path.empty() ? nmp_config_default(&cfg_) : nmp_config_load(path.c_str(), &cfg_));
    if (!scenario.empty() && scenario != "default")
      check(nmp_config_apply_scenario(cfg_, scenario.c_str()));
    if (seed) check(nmp_config_set_seed(cfg_, *seed));
  }
  ~Config() { nmp_config_free(cfg_); }
  Config(const Config&) = delete;
  Config& operator=(const Config&) = delete;

  nmp_config* get() const { return cfg_; }

  std::string out_dir(const std::string& flag) const {
    if (!flag.empty()) return flag;
    char* s = nullptr;
    check(nmp_config_output_dir(cfg_, &s));
    std::string dir(s);
    nmp_string_free(s);
    return dir;
  }

 private:
  nmp_config* cfg_ = nullptr;
};

std::string take(char* s) {
  std::string out = s ? s : "";
  nmp_string_free(s);
  return out;
}

void print_sim_summary(const std::string& text) {
  const auto rep = nlohmann::json::parse(text);
  std::cout << "fingerprint " << rep.value("fingerprint", "") << '\n';
  for (const auto& s : rep.at("scenarios")) {
    std::cout << "scenario " << s.value("name", "");
    if (s.contains("error") && !s["error"].is_null()) {
      std::cout << "  FAILED: " << s["error"].get<std::string>() << '\n';
      continue;
    }
    const auto& ht = s.at("ht");
    std::cout << "  ht_cycles=" << ht.value("memory_cycles", 0ull)
              << " eff_bw=" << ht.value("effective_bytes_per_cycle", 0.0)
              << " conflicts=" << ht.value("bank_conflicts", 0ull)
              << " iteration_cycles=" << s.at("iteration").value("total_cycles", 0ull)
              << " ledger_bytes=" << s.at("ledger").value("total_bytes", 0ull) << '\n';
  }
  if (rep.contains("ratios"))
    for (const auto& r : rep["ratios"]) {
      std::cout << "ratio " << r.value("a", "") << " / " << r.value("b", "") << "  eff_bw=";
      if (r["effective_bandwidth"].is_null())
        std::cout << "undefined";
      else
        std::cout << r["effective_bandwidth"].get<double>();
      std::cout << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Near-memory NeRF training simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", nmp_version());

  std::string config_path;
  std::string out_flag;
  std::optional<uint64_t> seed;
  std::string scenario;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Config file (JSON, comments allowed)");
    sub->add_option("--out", out_flag, "Output directory (overrides output.dir)");
    sub->add_option("--seed", seed, "Override workload.seed");
    sub->add_option("--scenario", scenario,
                    "Preset (proposed, baseline) or k=v,k=v overrides");
  };

  auto* trace = app.add_subcommand("trace", "Generate the hash-table access trace");
  common(trace);

  std::string trace_in;
  auto* sim = app.add_subcommand("sim", "Simulate one training iteration");
  common(sim);
  sim->add_option("--trace", trace_in, "Use a trace written by `trace`")->check(CLI::ExistingFile);

  std::string axes = "hash_kind,order";
  unsigned threads = 0;
  auto* sweep = app.add_subcommand("sweep", "Cartesian sweep over scenario axes");
  common(sweep);
  sweep->add_option("--axes", axes,
                    "Comma-separated axes: hash_kind, order, mapping, strategy, register, scene; "
                    "restrict values with key=a|b")
      ->capture_default_str();
  sweep->add_option("--threads", threads, "Worker threads (0: hardware concurrency)");

  std::string report_in;
  auto* report = app.add_subcommand("report", "Locality histogram, ledger table, CSV export");
  common(report);
  report->add_option("--report", report_in, "Report JSON to convert to CSV")
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    Config cfg(config_path, seed, scenario);
    const std::string out = cfg.out_dir(out_flag);
    char* summary = nullptr;
    if (trace->parsed()) {
      check(nmp_cmd_trace(cfg.get(), out.c_str(), &summary));
      const auto s = nlohmann::json::parse(take(summary));
      std::cout << "points " << s["points"] << "\nrequests " << s["requests"] << " (bound "
                << s["upper_bound_requests"] << ")\nbytes " << s["bytes"] << "\ntrace "
                << s["trace"].get<std::string>() << "\nfingerprint "
                << s["fingerprint"].get<std::string>() << '\n';
    } else if (sim->parsed()) {
      check(nmp_cmd_sim(cfg.get(), out.c_str(), scenario.c_str(), trace_in.c_str(), &summary));
      print_sim_summary(take(summary));
    } else if (sweep->parsed()) {
      const nmp_status s = nmp_cmd_sweep(cfg.get(), axes.c_str(), out.c_str(), threads, &summary);
      if (summary) print_sim_summary(take(summary));
      check(s);
    } else if (report->parsed()) {
      check(nmp_cmd_report(cfg.get(), out.c_str(), report_in.c_str(), &summary));
      std::cout << take(summary) << '\n';
    }
  } catch (const Failure& f) {
    std::cerr << "nmpnerf: " << status_name(f.status) << ": " << nmp_last_error() << '\n';
    return exit_code(f.status);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "nmpnerf: malformed summary: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
