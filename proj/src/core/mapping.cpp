#include "mapping.hpp"

#include <algorithm>
#include <bit>
#include <sstream>

#include "error.hpp"

namespace nmpnerf::mapping {

void DramGeometry::validate() const {
  if (channels < 1 || ranks_per_channel < 1) throw ConfigError("geometry needs >= 1 channel and rank");
  if (banks_per_chip < 1) throw ConfigError("geometry.banks_per_chip must be >= 1");
  if (!std::has_single_bit(subarrays_per_bank) || subarrays_per_bank > 64)
    throw ConfigError("geometry.subarrays_per_bank must be one of 1,2,4,8,16,32,64");
  if (!std::has_single_bit(row_bytes)) throw ConfigError("geometry.row_bytes must be a power of two");
  if (rows_per_subarray < 1) throw ConfigError("geometry.rows_per_subarray must be >= 1");
}

namespace {

void check_range(uint64_t addr, const DramGeometry& g) {
  if (addr >= g.total_capacity_bytes())
    throw DomainError("address " + std::to_string(addr) + " beyond DRAM capacity");
}

void split_upper(uint64_t bank_index, const DramGeometry& g, PhysicalAddress& p) {
  p.bank = uint32_t(bank_index % g.banks_per_chip);
  const uint64_t rest = bank_index / g.banks_per_chip;
  p.rank = uint32_t(rest % g.ranks_per_channel);
  p.channel = uint32_t(rest / g.ranks_per_channel);
}

uint64_t join_upper(const PhysicalAddress& p, const DramGeometry& g) {
  return (uint64_t{p.channel} * g.ranks_per_channel + p.rank) * g.banks_per_chip + p.bank;
}

void check_fields(const PhysicalAddress& p, const DramGeometry& g) {
  if (p.channel >= g.channels || p.rank >= g.ranks_per_channel || p.bank >= g.banks_per_chip ||
      p.subarray >= g.subarrays_per_bank || p.row >= g.rows_per_subarray || p.column >= g.row_bytes)
    throw DomainError("physical address field out of range");
}

}  // namespace

PhysicalAddress decode_rowmajor(uint64_t addr, const DramGeometry& g) {
  check_range(addr, g);
  PhysicalAddress p;
  p.column = uint32_t(addr % g.row_bytes);
  const uint64_t r = addr / g.row_bytes;
  p.row = uint32_t(r % g.rows_per_subarray);
  const uint64_t s = r / g.rows_per_subarray;
  p.subarray = uint32_t(s % g.subarrays_per_bank);
  split_upper(s / g.subarrays_per_bank, g, p);
  return p;
}

uint64_t encode_rowmajor(const PhysicalAddress& p, const DramGeometry& g) {
  check_fields(p, g);
  const uint64_t s = join_upper(p, g) * g.subarrays_per_bank + p.subarray;
  return (s * g.rows_per_subarray + p.row) * g.row_bytes + p.column;
}

PhysicalAddress decode_intra_level(uint64_t addr, const DramGeometry& g) {
  check_range(addr, g);
  PhysicalAddress p;
  p.column = uint32_t(addr % g.row_bytes);
  const uint64_t r = addr / g.row_bytes;
  const uint64_t local = r % g.rows_per_bank();
  p.subarray = uint32_t(local % g.subarrays_per_bank);
  p.row = uint32_t(local / g.subarrays_per_bank);
  split_upper(r / g.rows_per_bank(), g, p);
  return p;
}

uint64_t encode_intra_level(const PhysicalAddress& p, const DramGeometry& g) {
  check_fields(p, g);
  const uint64_t local = uint64_t{p.row} * g.subarrays_per_bank + p.subarray;
  return (join_upper(p, g) * g.rows_per_bank() + local) * g.row_bytes + p.column;
}

const char* to_string(SubarrayMapping m) {
  return m == SubarrayMapping::RowMajor ? "rowmajor" : "intra_level";
}

const char* to_string(LevelPolicy p) {
  return p == LevelPolicy::AllOneBank ? "all_one_bank" : "grouped_balanced";
}

SubarrayMapping subarray_mapping_from_string(std::string_view name) {
  if (name == "rowmajor") return SubarrayMapping::RowMajor;
  if (name == "intra_level") return SubarrayMapping::IntraLevel;
  throw ConfigError("unknown subarray mapping '" + std::string(name) +
                    "' (expected rowmajor|intra_level)");
}

LevelPolicy level_policy_from_string(std::string_view name) {
  if (name == "all_one_bank") return LevelPolicy::AllOneBank;
  if (name == "grouped_balanced") return LevelPolicy::GroupedBalanced;
  throw ConfigError("unknown level policy '" + std::string(name) +
                    "' (expected all_one_bank|grouped_balanced)");
}

std::vector<std::vector<int>> default_level_groups(int levels) {
  const std::vector<std::vector<int>> base{{0, 1, 2, 3, 4}, {5, 6, 7, 8}, {9, 10}};
  std::vector<std::vector<int>> out;
  for (const auto& g : base) {
    std::vector<int> kept;
    for (int l : g)
      if (l < levels) kept.push_back(l);
    if (!kept.empty()) out.push_back(kept);
  }
  for (int l = 11; l < levels; ++l) out.push_back({l});
  return out;
}

std::string LevelGroupAssignment::to_csv() const {
  std::ostringstream os;
  os << "level,owner,bank\n";
  for (size_t o = 0; o < owners.size(); ++o)
    for (int l : owners[o]) os << l << ',' << o << ',' << owner_bank[o] << '\n';
  return os.str();
}

LevelGroupAssignment assign_levels_to_banks(int levels, const DramGeometry& g, LevelPolicy policy,
                                            const std::vector<std::vector<int>>& groups) {
  if (levels < 1) throw ConfigError("level assignment needs at least one level");
  LevelGroupAssignment a;
  a.level_bank.assign(size_t(levels), 0);
  if (policy == LevelPolicy::AllOneBank) {
    std::vector<int> all(static_cast<size_t>(levels));
    for (int l = 0; l < levels; ++l) all[size_t(l)] = l;
    a.owners.push_back(all);
    a.owner_bank.push_back(0);
    return a;
  }
  a.owners = groups.empty() ? default_level_groups(levels) : groups;
  if (a.owners.size() > g.total_banks())
    throw ConfigError("level assignment needs " + std::to_string(a.owners.size()) +
                      " banks but geometry has " + std::to_string(g.total_banks()));
  std::vector<int> seen(size_t(levels), 0);
  for (size_t o = 0; o < a.owners.size(); ++o) {
    a.owner_bank.push_back(uint32_t(o));
    for (int l : a.owners[o]) {
      if (l < 0 || l >= levels) throw ConfigError("level group names level " + std::to_string(l));
      ++seen[size_t(l)];
      a.level_bank[size_t(l)] = uint32_t(o);
    }
  }
  for (int l = 0; l < levels; ++l)
    if (seen[size_t(l)] != 1)
      throw ConfigError("level " + std::to_string(l) + " must belong to exactly one group");
  return a;
}

AddressMap::AddressMap(const DramGeometry& g, const workload::TableLayout& layout,
                       const LevelGroupAssignment& assignment, SubarrayMapping mode)
    : geom_(g), layout_(layout), assign_(assignment), mode_(mode) {
  geom_.validate();
  if (layout_.row_bytes != geom_.row_bytes)
    throw ConfigError("table layout row size differs from the DRAM row size");
  if (assign_.level_bank.size() != layout_.level_offset.size())
    throw ConfigError("level assignment does not cover every table level");
  tables_end_.assign(geom_.total_banks(), 0);
  level_local_.resize(layout_.level_offset.size());
  for (size_t l = 0; l < layout_.level_offset.size(); ++l) {
    const uint32_t bank = assign_.level_bank[l];
    if (bank >= geom_.total_banks()) throw ConfigError("level assigned to a missing bank");
    level_local_[l] = tables_end_[bank];
    const uint64_t bytes = (layout_.level_bytes[l] + geom_.row_bytes - 1) / geom_.row_bytes *
                           geom_.row_bytes;
    tables_end_[bank] += bytes;
    if (tables_end_[bank] > geom_.bank_capacity_bytes())
      throw ConfigError("tables assigned to bank " + std::to_string(bank) + " exceed its capacity");
  }
}

PhysicalAddress AddressMap::decode_local(uint64_t local, uint32_t bank, bool striped) const {
  if (local >= geom_.bank_capacity_bytes())
    throw DomainError("bank-local offset " + std::to_string(local) + " beyond bank capacity");
  const uint64_t addr = uint64_t{bank} * geom_.bank_capacity_bytes() + local;
  return striped ? decode_intra_level(addr, geom_) : decode_rowmajor(addr, geom_);
}

MappedAddress AddressMap::map(uint64_t logical, uint32_t exec_bank) const {
  MappedAddress m;
  const int level = layout_.level_of(logical);
  if (level >= 0) {
    const uint64_t within = logical - layout_.level_offset[size_t(level)];
    m.bank = assign_.level_bank[size_t(level)];
    m.phys = decode_local(level_local_[size_t(level)] + within, m.bank,
                          mode_ == SubarrayMapping::IntraLevel);
    return m;
  }
  if (exec_bank >= geom_.total_banks())
    throw DomainError("execution bank " + std::to_string(exec_bank) + " does not exist");
  m.bank = exec_bank;
  m.phys = decode_local(tables_end_[exec_bank] + (logical - layout_.activation_base), exec_bank,
                        false);
  return m;
}

}  // namespace nmpnerf::mapping
