#include "dram.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <sstream>

#include "error.hpp"

namespace nmpnerf::dram {

void DramTimingParams::validate() const {
  for (int64_t v : {tCL, tRCD, tRPpb, tRAS, tCCD, tRRD, tFAW, tWR, tRA, tWA, row_transfer})
    if (v < 0) throw ConfigError("timing parameters must be >= 0");
  if (tRAS < tRCD) throw ConfigError("timing.tRAS must be >= timing.tRCD");
  if (refresh && (tREFI <= tRFC || tRFC < 0))
    throw ConfigError("timing.tREFI must exceed timing.tRFC when refresh is enabled");
}

const char* to_string(Scheduler s) { return s == Scheduler::FCFS ? "fcfs" : "frfcfs"; }

Scheduler scheduler_from_string(std::string_view name) {
  if (name == "fcfs") return Scheduler::FCFS;
  if (name == "frfcfs") return Scheduler::FRFCFS;
  throw ConfigError("unknown scheduler '" + std::string(name) + "' (expected fcfs|frfcfs)");
}

const char* to_string(CommandKind k) {
  switch (k) {
    case CommandKind::ACT: return "ACT";
    case CommandKind::RD: return "RD";
    case CommandKind::WR: return "WR";
    case CommandKind::PRE: return "PRE";
  }
  return "?";
}

BankState::BankState(uint32_t subarrays, const DramTimingParams& params)
    : p_(params), sub_(std::max<uint32_t>(subarrays, 1)) {}

std::optional<uint32_t> BankState::open_row(uint32_t subarray) const { return sub_.at(subarray).row; }

void BankState::close_all(int64_t now) {
  for (auto& s : sub_) s.row.reset();
  blocked_until_ = now + p_.tRFC;
  last_cmd_ = std::max(last_cmd_, now);
}

IssueCheck BankState::can_issue(const Command& cmd, int64_t now) const {
  constexpr int64_t kImpossible = std::numeric_limits<int64_t>::max();
  IssueCheck out;
  if (cmd.subarray >= sub_.size()) {
    out.blocking = "subarray";
    out.earliest = kImpossible;
    return out;
  }
  const Subarray& s = sub_[cmd.subarray];
  struct Limit {
    const char* tag;
    int64_t at;
  };
  std::array<Limit, 6> limits{};
  size_t n = 0;
  auto need = [&](const char* tag, int64_t at) { limits[n++] = {tag, at}; };
  need("busy", last_cmd_ + 1);
  need("refresh", blocked_until_);

  auto fail_state = [&](const char* tag) {
    out.blocking = tag;
    out.earliest = kImpossible;
    return out;
  };

  switch (cmd.kind) {
    case CommandKind::ACT:
      if (s.row) return fail_state("row_open");
      need("tRPpb", s.last_pre + p_.tRPpb);
      need("tRRD", last_act_ + p_.tRRD);
      if (recent_acts_.size() >= 4)
        need("tFAW", recent_acts_[recent_acts_.size() - 4] + p_.tFAW);
      break;
    case CommandKind::RD:
    case CommandKind::WR: {
      if (!s.row) return fail_state("row_closed");
      if (*s.row != cmd.row) return fail_state("wrong_row");
      need("tRCD", s.last_act + p_.tRCD);
      need("tCCD", last_col_ + p_.tCCD);
      if (last_col_sub_ && *last_col_sub_ != cmd.subarray) {
        const bool rd = cmd.kind == CommandKind::RD;
        need(rd ? "tRA" : "tWA", last_col_ + p_.tCCD + (rd ? p_.tRA : p_.tWA));
      }
      break;
    }
    case CommandKind::PRE:
      if (!s.row) return fail_state("row_closed");
      need("tRAS", s.last_act + p_.tRAS);
      need("tWR", s.last_wr + p_.tWR);
      break;
  }
  const Limit* binding = nullptr;
  out.earliest = now;
  for (size_t i = 0; i < n; ++i) {
    const Limit& l = limits[i];
    if (l.at > out.earliest) {
      out.earliest = l.at;
      binding = &l;
    }
  }
  out.allowed = binding == nullptr;
  if (binding) out.blocking = binding->tag;
  return out;
}

void BankState::apply(const Command& cmd) {
  Subarray& s = sub_.at(cmd.subarray);
  const int64_t t = cmd.issue_cycle;
  last_cmd_ = t;
  switch (cmd.kind) {
    case CommandKind::ACT:
      s.row = cmd.row;
      s.last_act = t;
      last_act_ = t;
      recent_acts_.push_back(t);
      if (recent_acts_.size() > 4) recent_acts_.pop_front();
      break;
    case CommandKind::RD:
    case CommandKind::WR:
      last_col_ = t;
      last_col_sub_ = cmd.subarray;
      if (cmd.kind == CommandKind::WR) s.last_wr = t;
      break;
    case CommandKind::PRE:
      s.row.reset();
      s.last_pre = t;
      break;
  }
}

void DramStats::add(const DramStats& o) {
  requests += o.requests;
  reads += o.reads;
  writes += o.writes;
  row_hits += o.row_hits;
  row_misses += o.row_misses;
  bank_conflicts += o.bank_conflicts;
  subarray_switches += o.subarray_switches;
  activations += o.activations;
  precharges += o.precharges;
  refreshes += o.refreshes;
  bytes += o.bytes;
  total_cycles = std::max(total_cycles, o.total_cycles);
}

namespace {

struct Candidate {
  size_t req = 0;   // index into the bank queue
  Command cmd;
  int64_t earliest = 0;
  bool column = false;
};

void simulate_bank(std::span<const DramRequest> all, const std::vector<size_t>& queue,
                   uint32_t bank, uint32_t subarrays, const DramTimingParams& p,
                   const ServiceOptions& opt, ServiceResult& result) {
  BankState st(subarrays, p);
  DramStats& stats = result.per_bank[bank];
  std::vector<char> done(queue.size(), 0);
  std::vector<char> started(queue.size(), 0);
  size_t head = 0;
  size_t remaining = queue.size();
  int64_t now = 0;
  int64_t next_refresh = p.refresh ? p.tREFI : std::numeric_limits<int64_t>::max();
  std::optional<uint32_t> last_col_sub;
  const uint32_t window = std::max<uint32_t>(opt.window, 1);

  std::vector<size_t> win;
  std::vector<Candidate> cands;
  // Per-subarray PRE/ACT owner: the window position allowed to open or close it.
  std::vector<int64_t> owner(subarrays);
  std::vector<char> has_hit(subarrays);

  while (remaining > 0) {
    if (now >= next_refresh) {
      st.close_all(next_refresh);
      ++stats.refreshes;
      now = std::max(now, next_refresh + p.tRFC);
      next_refresh += p.tREFI;
      continue;
    }
    while (head < queue.size() && done[head]) ++head;
    win.clear();
    for (size_t i = head; i < queue.size() && win.size() < window; ++i)
      if (!done[i]) win.push_back(i);

    std::fill(owner.begin(), owner.end(), -1);
    std::fill(has_hit.begin(), has_hit.end(), 0);
    for (size_t w = 0; w < win.size(); ++w) {
      const DramRequest& r = all[queue[win[w]]];
      const auto open = st.open_row(r.subarray);
      if (open && *open == r.row) has_hit[r.subarray] = 1;
      if (owner[r.subarray] < 0) owner[r.subarray] = int64_t(w);
    }

    cands.clear();
    for (size_t w = 0; w < win.size(); ++w) {
      const DramRequest& r = all[queue[win[w]]];
      const auto open = st.open_row(r.subarray);
      Candidate c;
      c.req = win[w];
      c.cmd.subarray = r.subarray;
      c.cmd.row = r.row;
      if (open && *open == r.row) {
        c.cmd.kind = r.write ? CommandKind::WR : CommandKind::RD;
        c.column = true;
      } else {
        if (owner[r.subarray] != int64_t(w)) continue;
        if (opt.scheduler == Scheduler::FRFCFS && has_hit[r.subarray]) continue;
        c.cmd.kind = open ? CommandKind::PRE : CommandKind::ACT;
      }
      c.earliest = st.can_issue(c.cmd, now).earliest;
      cands.push_back(c);
    }
    if (cands.empty()) throw InvariantViolation("DRAM scheduler stalled with pending requests");

    const Candidate* pick = nullptr;
    int64_t soonest = std::numeric_limits<int64_t>::max();
    for (const auto& c : cands) {
      soonest = std::min(soonest, c.earliest);
      if (c.earliest > now) continue;
      if (!pick) {
        pick = &c;
      } else if (opt.scheduler == Scheduler::FRFCFS && c.column && !pick->column) {
        pick = &c;
      }
    }
    if (!pick) {
      if (soonest == std::numeric_limits<int64_t>::max())
        throw InvariantViolation("DRAM scheduler found no legal command");
      now = std::min(soonest, next_refresh);
      continue;
    }

    Command cmd = pick->cmd;
    cmd.issue_cycle = now;
    st.apply(cmd);
    const size_t qi = pick->req;
    const DramRequest& r = all[queue[qi]];
    if (!started[qi]) {
      started[qi] = 1;
      if (cmd.kind == CommandKind::PRE) {
        ++stats.bank_conflicts;
        ++stats.row_misses;
      } else if (cmd.kind == CommandKind::ACT) {
        ++stats.row_misses;
      } else {
        ++stats.row_hits;
      }
    }
    if (cmd.kind == CommandKind::ACT) ++stats.activations;
    if (cmd.kind == CommandKind::PRE) ++stats.precharges;
    if (opt.log_commands) result.log.push_back({now, bank, cmd.subarray, cmd.kind, cmd.row, r.id});
    if (pick->column) {
      if (last_col_sub && *last_col_sub != cmd.subarray) ++stats.subarray_switches;
      last_col_sub = cmd.subarray;
      const int64_t finish = now + p.tCL + p.row_transfer;
      result.completion[queue[qi]] = finish;
      stats.total_cycles = std::max(stats.total_cycles, finish);
      done[qi] = 1;
      --remaining;
    }
  }
}

}  // namespace

ServiceResult service_requests(std::span<const DramRequest> requests, uint32_t banks,
                               uint32_t subarrays, const DramTimingParams& params,
                               const ServiceOptions& options) {
  params.validate();
  ServiceResult result;
  result.completion.assign(requests.size(), 0);
  result.per_bank.assign(banks, DramStats{});
  std::vector<std::vector<size_t>> queues(banks);
  for (size_t i = 0; i < requests.size(); ++i) {
    const auto& r = requests[i];
    if (r.bank >= banks)
      throw DomainError("request " + std::to_string(r.id) + " targets missing bank " +
                        std::to_string(r.bank));
    if (r.subarray >= subarrays)
      throw DomainError("request " + std::to_string(r.id) + " targets missing subarray");
    queues[r.bank].push_back(i);
    auto& s = result.per_bank[r.bank];
    ++s.requests;
    ++(r.write ? s.writes : s.reads);
    s.bytes += r.bytes;
  }
  for (uint32_t b = 0; b < banks; ++b) {
    if (queues[b].empty()) continue;
    simulate_bank(requests, queues[b], b, subarrays, params, options, result);
  }
  for (const auto& s : result.per_bank) result.stats.add(s);
  return result;
}

ServiceResult service_trace(std::span<const workload::MemoryRequest> trace,
                            const mapping::AddressMap& map, const DramTimingParams& params,
                            const ServiceOptions& options, uint32_t exec_bank) {
  std::vector<DramRequest> reqs;
  reqs.reserve(trace.size());
  for (const auto& r : trace) {
    mapping::MappedAddress m;
    try {
      m = map.map(r.address, exec_bank);
    } catch (const DomainError& e) {
      throw DomainError("request " + std::to_string(r.id) + ": " + e.what());
    }
    reqs.push_back({r.id, r.kind == workload::RequestKind::Write, m.bank, m.phys.subarray,
                    m.phys.row, r.size});
  }
  const auto& g = map.geometry();
  return service_requests(reqs, g.total_banks(), g.subarrays_per_bank, params, options);
}

Bandwidth peak_and_effective_bandwidth(const DramStats& stats, uint64_t useful_bytes,
                                       uint32_t row_bytes, const DramTimingParams& params,
                                       uint32_t banks_used) {
  if (stats.total_cycles <= 0) throw DomainError("bandwidth undefined for a zero-cycle run");
  Bandwidth b;
  b.peak_bytes_per_cycle =
      double(banks_used) * double(row_bytes) / double(std::max<int64_t>(params.tCCD, 1));
  b.effective_bytes_per_cycle = double(useful_bytes) / double(stats.total_cycles);
  b.utilization = b.effective_bytes_per_cycle / b.peak_bytes_per_cycle;
  return b;
}

std::string command_log_csv(std::span<const CommandLogEntry> log) {
  std::ostringstream os;
  os << "cycle,bank,subarray,command,row,request\n";
  for (const auto& e : log)
    os << e.cycle << ',' << e.bank << ',' << e.subarray << ',' << to_string(e.kind) << ','
       << e.row << ',' << e.request_id << '\n';
  return os.str();
}

}  // namespace nmpnerf::dram
