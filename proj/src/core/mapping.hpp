#pragma once

// Logical-to-physical address mapping: DRAM geometry, the row-major and
// intra-level (subarray-striped) decoders, and level-to-bank assignment.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "workload.hpp"

namespace nmpnerf::mapping {

struct DramGeometry {
  uint32_t channels = 1;
  uint32_t ranks_per_channel = 1;
  uint32_t banks_per_chip = 16;
  uint32_t subarrays_per_bank = 16;
  uint32_t row_bytes = 1024;
  uint32_t rows_per_subarray = 8192;

  uint64_t bank_capacity_bytes() const {
    return uint64_t{subarrays_per_bank} * rows_per_subarray * row_bytes;
  }
  uint64_t rows_per_bank() const { return uint64_t{subarrays_per_bank} * rows_per_subarray; }
  uint32_t total_banks() const { return channels * ranks_per_channel * banks_per_chip; }
  uint64_t total_capacity_bytes() const { return bank_capacity_bytes() * total_banks(); }
  void validate() const;
};

struct PhysicalAddress {
  uint32_t channel = 0;
  uint32_t rank = 0;
  uint32_t bank = 0;  // chip-local bank
  uint32_t subarray = 0;
  uint32_t row = 0;   // row within the subarray
  uint32_t column = 0;

  friend bool operator==(const PhysicalAddress&, const PhysicalAddress&) = default;
};

// Bit fields from low to high: column, row, subarray, bank, rank, channel.
PhysicalAddress decode_rowmajor(uint64_t addr, const DramGeometry& g);
uint64_t encode_rowmajor(const PhysicalAddress& p, const DramGeometry& g);

// Same fields, but consecutive rows of a bank stripe round-robin over subarrays.
PhysicalAddress decode_intra_level(uint64_t addr, const DramGeometry& g);
uint64_t encode_intra_level(const PhysicalAddress& p, const DramGeometry& g);

enum class SubarrayMapping { RowMajor, IntraLevel };
enum class LevelPolicy { AllOneBank, GroupedBalanced };

const char* to_string(SubarrayMapping m);
const char* to_string(LevelPolicy p);
SubarrayMapping subarray_mapping_from_string(std::string_view name);
LevelPolicy level_policy_from_string(std::string_view name);

// {0-4}, {5-8}, {9-10}, then one owner per remaining level; truncated for
// grids with fewer levels.
std::vector<std::vector<int>> default_level_groups(int levels);

struct LevelGroupAssignment {
  std::vector<std::vector<int>> owners;  // levels per owner
  std::vector<uint32_t> owner_bank;
  std::vector<uint32_t> level_bank;      // global bank per level

  std::string to_csv() const;
};

LevelGroupAssignment assign_levels_to_banks(int levels, const DramGeometry& g, LevelPolicy policy,
                                            const std::vector<std::vector<int>>& groups = {});

struct MappedAddress {
  uint32_t bank = 0;  // global bank id
  PhysicalAddress phys;
};

// Places each level's region inside its owner bank (row-aligned, level order)
// and activation buffers after the tables of the bank that executes them.
class AddressMap {
 public:
  AddressMap(const DramGeometry& g, const workload::TableLayout& layout,
             const LevelGroupAssignment& assignment, SubarrayMapping mode);

  // Table addresses go to the owner bank; activation addresses go to `exec_bank`.
  MappedAddress map(uint64_t logical, uint32_t exec_bank = 0) const;

  const DramGeometry& geometry() const { return geom_; }
  const LevelGroupAssignment& assignment() const { return assign_; }
  SubarrayMapping mode() const { return mode_; }
  uint64_t level_bank_offset(int level) const { return level_local_[size_t(level)]; }

 private:
  DramGeometry geom_;
  workload::TableLayout layout_;
  LevelGroupAssignment assign_;
  SubarrayMapping mode_;
  std::vector<uint64_t> level_local_;  // bank-local byte offset of each level
  std::vector<uint64_t> tables_end_;   // bank-local end of table data per bank

  PhysicalAddress decode_local(uint64_t local, uint32_t bank, bool striped) const;
};

}  // namespace nmpnerf::mapping
