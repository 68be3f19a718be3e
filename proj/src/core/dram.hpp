#pragma once

// Cycle-level bank/subarray timing model. Each bank runs its own command
// queue (one command per bank per cycle); banks do not share a bus.

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mapping.hpp"
#include "workload.hpp"

namespace nmpnerf::dram {

// All values in 200 MHz engine cycles.
struct DramTimingParams {
  int64_t tCL = 4;
  int64_t tRCD = 4;
  int64_t tRPpb = 6;
  int64_t tRAS = 9;
  int64_t tCCD = 8;
  int64_t tRRD = 2;
  int64_t tFAW = 9;
  int64_t tWR = 6;
  int64_t tRA = 2;
  int64_t tWA = 7;
  int64_t row_transfer = 1;  // open row into the engine register
  bool refresh = false;
  int64_t tREFI = 1560;
  int64_t tRFC = 28;

  void validate() const;
};

enum class Scheduler { FCFS, FRFCFS };
const char* to_string(Scheduler s);
Scheduler scheduler_from_string(std::string_view name);

enum class CommandKind { ACT, RD, WR, PRE };
const char* to_string(CommandKind k);

struct Command {
  CommandKind kind = CommandKind::ACT;
  uint32_t subarray = 0;
  uint32_t row = 0;
  int64_t issue_cycle = 0;
};

struct IssueCheck {
  bool allowed = false;
  std::string blocking;  // constraint tag when blocked
  int64_t earliest = 0;  // first cycle the command becomes legal given the current state
};

class BankState {
 public:
  BankState(uint32_t subarrays, const DramTimingParams& params);

  IssueCheck can_issue(const Command& cmd, int64_t now) const;
  // Applies an issued command; the caller checks legality first.
  void apply(const Command& cmd);

  std::optional<uint32_t> open_row(uint32_t subarray) const;
  void close_all(int64_t now);
  uint32_t subarrays() const { return uint32_t(sub_.size()); }

 private:
  static constexpr int64_t kNever = INT64_MIN / 4;
  struct Subarray {
    std::optional<uint32_t> row;
    int64_t last_act = kNever;
    int64_t last_pre = kNever;
    int64_t last_wr = kNever;
  };
  DramTimingParams p_;
  std::vector<Subarray> sub_;
  std::deque<int64_t> recent_acts_;
  int64_t last_act_ = kNever;
  int64_t last_col_ = kNever;
  int64_t last_cmd_ = kNever;
  std::optional<uint32_t> last_col_sub_;
  int64_t blocked_until_ = kNever;
};

struct DramRequest {
  uint64_t id = 0;
  bool write = false;
  uint32_t bank = 0;
  uint32_t subarray = 0;
  uint32_t row = 0;
  uint32_t bytes = 0;
};

struct DramStats {
  uint64_t requests = 0;
  uint64_t reads = 0;
  uint64_t writes = 0;
  uint64_t row_hits = 0;
  uint64_t row_misses = 0;       // includes conflicts
  uint64_t bank_conflicts = 0;   // target subarray had a different row open
  uint64_t subarray_switches = 0;
  uint64_t activations = 0;
  uint64_t precharges = 0;
  uint64_t refreshes = 0;
  uint64_t bytes = 0;
  int64_t total_cycles = 0;

  void add(const DramStats& o);
  double row_hit_rate() const { return requests ? double(row_hits) / double(requests) : 0.0; }
};

struct CommandLogEntry {
  int64_t cycle = 0;
  uint32_t bank = 0;
  uint32_t subarray = 0;
  CommandKind kind = CommandKind::ACT;
  uint32_t row = 0;
  uint64_t request_id = 0;
};

struct ServiceOptions {
  Scheduler scheduler = Scheduler::FRFCFS;
  uint32_t window = 16;
  bool log_commands = false;
};

struct ServiceResult {
  std::vector<int64_t> completion;       // per input request, same order
  DramStats stats;
  std::vector<DramStats> per_bank;       // indexed by bank id
  std::vector<CommandLogEntry> log;      // ordered by (bank, cycle) when enabled
};

ServiceResult service_requests(std::span<const DramRequest> requests, uint32_t banks,
                               uint32_t subarrays, const DramTimingParams& params,
                               const ServiceOptions& options);

// Decodes each request through the map; activation addresses run on exec_bank.
ServiceResult service_trace(std::span<const workload::MemoryRequest> trace,
                            const mapping::AddressMap& map, const DramTimingParams& params,
                            const ServiceOptions& options, uint32_t exec_bank = 0);

struct Bandwidth {
  double peak_bytes_per_cycle = 0.0;
  double effective_bytes_per_cycle = 0.0;
  double utilization = 0.0;
};

// Peak is one row per tCCD for every bank used; throws DomainError on a zero-cycle run.
Bandwidth peak_and_effective_bandwidth(const DramStats& stats, uint64_t useful_bytes,
                                       uint32_t row_bytes, const DramTimingParams& params,
                                       uint32_t banks_used = 1);

std::string command_log_csv(std::span<const CommandLogEntry> log);

}  // namespace nmpnerf::dram
