#include <doctest.h>

#include <string>
#include <vector>

#include "dram.hpp"
#include "error.hpp"

using namespace nmpnerf;
using namespace nmpnerf::dram;

namespace {

struct Run {
  ServiceResult r;
  std::vector<std::pair<std::string, int64_t>> cmds;
};

Run run(const std::vector<DramRequest>& reqs, DramTimingParams p = {},
        Scheduler s = Scheduler::FCFS) {
  ServiceOptions o;
  o.scheduler = s;
  o.log_commands = true;
  Run out{service_requests(reqs, 1, 16, p, o), {}};
  for (const auto& e : out.r.log) out.cmds.emplace_back(to_string(e.kind), e.cycle);
  return out;
}

DramRequest rd(uint64_t id, uint32_t sa, uint32_t row) { return {id, false, 0, sa, row, 32}; }
DramRequest wr(uint64_t id, uint32_t sa, uint32_t row) { return {id, true, 0, sa, row, 32}; }

using Cmds = std::vector<std::pair<std::string, int64_t>>;

}  // namespace

TEST_CASE("can_issue") {
  DramTimingParams p;
  BankState b(16, p);
  CHECK(b.can_issue({CommandKind::ACT, 0, 5, 0}, 0).allowed);
  b.apply({CommandKind::ACT, 0, 5, 0});
  const auto c = b.can_issue({CommandKind::RD, 0, 5, 3}, 3);
  CHECK_FALSE(c.allowed);
  CHECK(c.blocking == "tRCD");
  CHECK(c.earliest == 4);
  CHECK(b.can_issue({CommandKind::ACT, 1, 9, 2}, 2).allowed);
  const auto rrd = b.can_issue({CommandKind::ACT, 1, 9, 1}, 1);
  CHECK(rrd.blocking == "tRRD");
  CHECK(b.can_issue({CommandKind::ACT, 0, 6, 20}, 20).blocking == "row_open");
  CHECK(b.can_issue({CommandKind::RD, 0, 6, 20}, 20).blocking == "wrong_row");
  CHECK(b.can_issue({CommandKind::RD, 2, 6, 20}, 20).blocking == "row_closed");
  CHECK(b.can_issue({CommandKind::PRE, 0, 5, 8}, 8).blocking == "tRAS");
}

TEST_CASE("golden: single read on a closed bank") {
  const auto x = run({rd(0, 0, 3)});
  CHECK(x.cmds == Cmds{{"ACT", 0}, {"RD", 4}});
  CHECK(x.r.completion[0] == 9);
  CHECK(x.r.stats.row_misses == 1);
  CHECK(x.r.stats.total_cycles == 9);
}

TEST_CASE("golden: same-subarray bank conflict") {
  const auto x = run({rd(0, 0, 3), rd(1, 0, 4)});
  CHECK(x.cmds == Cmds{{"ACT", 0}, {"RD", 4}, {"PRE", 9}, {"ACT", 15}, {"RD", 19}});
  CHECK(x.r.completion[0] == 9);
  CHECK(x.r.completion[1] == 24);
  CHECK(x.r.stats.bank_conflicts == 1);
  CHECK(x.r.stats.precharges == 1);
}

TEST_CASE("golden: subarray-parallel pair") {
  const auto x = run({rd(0, 0, 3), rd(1, 1, 4)});
  CHECK(x.cmds == Cmds{{"ACT", 0}, {"ACT", 2}, {"RD", 4}, {"RD", 14}});
  CHECK(x.r.completion[0] == 9);
  CHECK(x.r.completion[1] == 19);
  DramTimingParams p;
  CHECK(x.r.completion[1] <= x.r.completion[0] + p.tRRD + p.tRA + p.tCCD);
  CHECK(x.r.stats.subarray_switches == 1);
}

TEST_CASE("golden: row hit") {
  const auto x = run({rd(0, 2, 7), rd(1, 2, 7)});
  CHECK(x.cmds == Cmds{{"ACT", 0}, {"RD", 4}, {"RD", 12}});
  CHECK(x.r.completion[1] == 17);
  CHECK(x.r.stats.row_hits == 1);
  CHECK(x.r.stats.row_misses == 1);
}

TEST_CASE("golden: write then precharge") {
  const auto x = run({wr(0, 0, 1), rd(1, 0, 2)});
  CHECK(x.cmds == Cmds{{"ACT", 0}, {"WR", 4}, {"PRE", 10}, {"ACT", 16}, {"RD", 20}});
  CHECK(x.r.completion[0] == 9);
  CHECK(x.r.completion[1] == 25);
}

TEST_CASE("golden: tFAW saturation") {
  std::vector<DramRequest> five;
  for (uint32_t i = 0; i < 5; ++i) five.push_back(rd(i, i, 1));
  auto x = run(five);
  CHECK(x.cmds == Cmds{{"ACT", 0}, {"ACT", 2}, {"RD", 4}, {"ACT", 5}, {"ACT", 7}, {"ACT", 9},
                       {"RD", 14}, {"RD", 24}, {"RD", 34}, {"RD", 44}});
  CHECK(x.r.completion == std::vector<int64_t>{9, 19, 29, 39, 49});

  DramTimingParams slow;
  slow.tRCD = 20;
  slow.tRAS = 20;
  x = run(five, slow);
  std::vector<int64_t> acts;
  for (const auto& [k, c] : x.cmds)
    if (k == "ACT") acts.push_back(c);
  CHECK(acts == std::vector<int64_t>{0, 2, 4, 6, 9});
}

TEST_CASE("FR-FCFS serves pending row hits first") {
  const std::vector<DramRequest> reqs{rd(0, 0, 1), rd(1, 0, 2), rd(2, 0, 1), rd(3, 0, 2)};
  const auto f = run(reqs, {}, Scheduler::FCFS);
  const auto fr = run(reqs, {}, Scheduler::FRFCFS);
  CHECK(fr.r.stats.total_cycles < f.r.stats.total_cycles);
  CHECK(fr.r.stats.row_hits == 2);
  CHECK(f.r.stats.row_hits == 0);
  CHECK(fr.r.completion[2] < fr.r.completion[1]);
}

TEST_CASE("banks run independently") {
  ServiceOptions o;
  std::vector<DramRequest> reqs{{0, false, 0, 0, 1, 32}, {1, false, 3, 0, 1, 32}};
  const auto r = service_requests(reqs, 4, 16, {}, o);
  CHECK(r.completion == std::vector<int64_t>{9, 9});
  CHECK(r.per_bank[3].requests == 1);
  CHECK(r.stats.requests == 2);
  reqs[1].bank = 4;
  CHECK_THROWS_AS(service_requests(reqs, 4, 16, {}, o), DomainError);
}

TEST_CASE("refresh delays a long stream") {
  std::vector<DramRequest> reqs;
  for (uint32_t i = 0; i < 400; ++i) reqs.push_back(rd(i, i % 16, i / 16));
  DramTimingParams p;
  const auto base = run(reqs, p);
  p.refresh = true;
  const auto ref = run(reqs, p);
  CHECK(ref.r.stats.refreshes > 0);
  CHECK(ref.r.stats.total_cycles > base.r.stats.total_cycles);
}

TEST_CASE("bandwidth") {
  DramStats s;
  s.total_cycles = 100;
  DramTimingParams p;
  auto b = peak_and_effective_bandwidth(s, 400, 1024, p, 2);
  CHECK(b.peak_bytes_per_cycle == doctest::Approx(256.0));
  CHECK(b.effective_bytes_per_cycle == doctest::Approx(4.0));

  // Full-row sequential reads approach the peak; 32 B per row is 32/1024 of it.
  std::vector<DramRequest> full, sparse;
  for (uint32_t i = 0; i < 256; ++i) {
    full.push_back({i, false, 0, 0, 1, 1024});
    sparse.push_back({i, false, 0, 0, 1, 32});
  }
  const auto rf = service_requests(full, 1, 16, p, {});
  const auto bf = peak_and_effective_bandwidth(rf.stats, rf.stats.bytes, 1024, p);
  CHECK(bf.utilization > 0.95);
  CHECK(bf.utilization <= 1.0);
  const auto rs = service_requests(sparse, 1, 16, p, {});
  const auto bs = peak_and_effective_bandwidth(rs.stats, rs.stats.bytes, 1024, p);
  CHECK(bs.utilization == doctest::Approx(bf.utilization * 32.0 / 1024.0));
  CHECK_THROWS_AS(peak_and_effective_bandwidth(DramStats{}, 0, 1024, p), DomainError);
}

TEST_CASE("command log CSV") {
  const auto x = run({rd(0, 0, 3)});
  const auto csv = command_log_csv(x.r.log);
  CHECK(csv == "cycle,bank,subarray,command,row,request\n0,0,0,ACT,3,0\n4,0,0,RD,3,0\n");
}
