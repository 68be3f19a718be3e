#include <doctest.h>

#include "error.hpp"
#include "mapping.hpp"

using namespace nmpnerf;
using namespace nmpnerf::mapping;

TEST_CASE("row-major decode") {
  DramGeometry g;
  CHECK(decode_rowmajor(0, g) == PhysicalAddress{});
  auto p = decode_rowmajor(g.row_bytes, g);
  CHECK(p.row == 1);
  CHECK(p.column == 0);
  p = decode_rowmajor(uint64_t{g.rows_per_subarray} * g.row_bytes, g);
  CHECK(p.subarray == 1);
  CHECK(p.row == 0);
  p = decode_rowmajor(g.bank_capacity_bytes() * 3 + 77, g);
  CHECK(p.bank == 3);
  CHECK(p.column == 77);
  CHECK_THROWS_AS(decode_rowmajor(g.total_capacity_bytes(), g), DomainError);
}

TEST_CASE("intra-level decode stripes rows over subarrays") {
  DramGeometry g;
  g.subarrays_per_bank = 8;
  for (uint32_t r = 0; r < 8; ++r) {
    const auto p = decode_intra_level(uint64_t{r} * g.row_bytes, g);
    CHECK(p.subarray == r);
    CHECK(p.row == 0);
  }
  const auto p8 = decode_intra_level(8ull * g.row_bytes, g);
  CHECK(p8.subarray == 0);
  CHECK(p8.row == 1);
  const auto a = decode_intra_level(5ull * g.row_bytes, g);
  const auto b = decode_intra_level(6ull * g.row_bytes, g);
  CHECK(a.bank == b.bank);
  CHECK(a.subarray != b.subarray);
}

TEST_CASE("encode inverts decode") {
  DramGeometry g;
  g.channels = 2;
  g.ranks_per_channel = 2;
  for (uint64_t addr : std::initializer_list<uint64_t>{0, 1023, 1024, 123456789, g.total_capacity_bytes() - 1}) {
    CHECK(encode_rowmajor(decode_rowmajor(addr, g), g) == addr);
    CHECK(encode_intra_level(decode_intra_level(addr, g), g) == addr);
  }
}

TEST_CASE("level assignment") {
  DramGeometry g;
  auto a = assign_levels_to_banks(16, g, LevelPolicy::GroupedBalanced);
  REQUIRE(a.owners.size() == 8);
  for (uint32_t o = 0; o < 8; ++o) CHECK(a.owner_bank[o] == o);
  CHECK(a.owners[0] == std::vector<int>{0, 1, 2, 3, 4});
  CHECK(a.owners[1] == std::vector<int>{5, 6, 7, 8});
  CHECK(a.owners[2] == std::vector<int>{9, 10});
  CHECK(a.owners[7] == std::vector<int>{15});
  CHECK(a.level_bank[12] == 4);

  a = assign_levels_to_banks(16, g, LevelPolicy::AllOneBank);
  REQUIRE(a.owners.size() == 1);
  for (uint32_t b : a.level_bank) CHECK(b == 0);

  g.banks_per_chip = 8;
  a = assign_levels_to_banks(16, g, LevelPolicy::GroupedBalanced);
  CHECK(a.owners.size() == 8);
  CHECK(a.owner_bank.back() == 7);
  g.banks_per_chip = 4;
  CHECK_THROWS_AS(assign_levels_to_banks(16, g, LevelPolicy::GroupedBalanced), ConfigError);
}

TEST_CASE("address map places levels in owner banks") {
  DramGeometry g;
  grid::HashGridConfig grid;
  const auto layout = workload::TableLayout::make(grid.level_configs(), 4, g.row_bytes);
  const auto assign = assign_levels_to_banks(16, g, LevelPolicy::GroupedBalanced);
  const AddressMap map(g, layout, assign, SubarrayMapping::IntraLevel);
  for (int l = 0; l < 16; ++l) {
    const auto m = map.map(layout.level_offset[size_t(l)]);
    CHECK(m.bank == assign.level_bank[size_t(l)]);
    CHECK(m.phys.column == 0);
  }
  // First level of each owner starts at bank-local row 0.
  CHECK(map.map(layout.level_offset[5]).phys.row == 0);
  CHECK(map.map(layout.level_offset[5]).phys.subarray == 0);
  CHECK(map.map(layout.level_offset[5] + 1024).phys.subarray == 1);
  const auto act = map.map(layout.activation_base, 9);
  CHECK(act.bank == 9);
}
