#pragma once

// Memory-access trace generation: point streaming order, the per-level cube
// register, hash-table lookup traces, MLP streaming traces and row
// coalescing. Also the binary/CSV trace file formats.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hashgrid.hpp"
#include "nerf_ref.hpp"

namespace nmpnerf::workload {

enum class RequestKind : uint8_t { Read = 0, Write = 1 };
enum class Kernel : uint8_t { HT = 0, HT_b = 1, MLP = 2, MLP_b = 3 };
enum class StreamOrder { RayFirst, RandomShuffle };
enum class SceneKind { Orbit, Forward, Object };

const char* to_string(Kernel k);
const char* to_string(StreamOrder o);
const char* to_string(SceneKind s);
StreamOrder stream_order_from_string(std::string_view name);
SceneKind scene_kind_from_string(std::string_view name);

// issue_order packs (group << 16) | slot: a group is one cube lookup (HT) or
// one tile (MLP). Strictly increasing within a trace.
inline constexpr int kSlotBits = 16;

struct MemoryRequest {
  uint64_t id = 0;
  RequestKind kind = RequestKind::Read;
  uint64_t address = 0;
  uint32_t size = 0;
  Kernel kernel = Kernel::HT;
  uint64_t order = 0;

  uint64_t group() const { return order >> kSlotBits; }
  friend bool operator==(const MemoryRequest&, const MemoryRequest&) = default;
};

struct TraceMeta {
  uint64_t points = 0;
  uint32_t levels = 0;
  uint64_t cube_lookups = 0;     // points x levels for HT traces
  uint64_t consumed_bytes = 0;   // bytes the kernel consumes, however they are served
  uint64_t entry_lookups = 0;    // entries needed (8 per cube lookup)
  uint64_t register_hits = 0;    // entries served from the cube register
};

struct AccessTrace {
  std::vector<MemoryRequest> requests;
  TraceMeta meta;

  uint64_t total_bytes() const;
};

// Logical address space: one contiguous region per level in level order,
// each starting on a row boundary, then the activation region.
struct TableLayout {
  uint32_t entry_bytes = 4;
  uint32_t row_bytes = 1024;
  std::vector<uint64_t> level_offset;
  std::vector<uint64_t> level_bytes;
  uint64_t activation_base = 0;

  static TableLayout make(const std::vector<grid::LevelConfig>& levels, uint32_t entry_bytes,
                          uint32_t row_bytes);
  // Level owning a table address, or -1 for the activation region.
  int level_of(uint64_t address) const;
};

struct RayBatch {
  std::vector<std::vector<grid::Point3>> rays;
  uint64_t point_count() const;
};

RayBatch synthesize_scene(SceneKind kind, int rays, int samples_per_ray, uint64_t seed);
std::vector<grid::Point3> uniform_points(uint64_t n, uint64_t seed);

std::vector<grid::Point3> order_points(const RayBatch& batch, StreamOrder mode, uint64_t seed);

struct HtTraceOptions {
  bool register_on = true;
  uint32_t register_capacity = 1;  // cubes held per level
  Kernel kernel = Kernel::HT;      // HT_b emits reads then writes per cube
};

AccessTrace generate_ht_trace(std::span<const grid::Point3> stream,
                              const grid::HashGridConfig& grid, const TableLayout& layout,
                              const HtTraceOptions& options);

struct CoalesceStats {
  uint64_t groups = 0;        // groups that emitted at least one request
  uint64_t input_requests = 0;
  uint64_t row_requests = 0;
  double requests_per_group() const { return groups ? double(row_requests) / double(groups) : 0.0; }
};

struct CoalescedTrace {
  AccessTrace trace;
  CoalesceStats stats;
};

// Merges consecutive requests of one group that fall into the same row and
// have the same kind. Merged size is the sum of payload bytes.
CoalescedTrace coalesce_to_rows(const AccessTrace& trace, uint32_t row_bytes);

struct MlpTraceSpec {
  Kernel kernel = Kernel::MLP;             // MLP or MLP_b
  uint64_t points = 0;
  std::vector<nerf::LayerDim> layers;      // density then color layers
  uint32_t bytes_per_value = 2;
  uint32_t grad_bytes = 4;                 // weight-gradient partial sums (MLP_b)
  uint32_t tile_points = 8;
  uint64_t base_address = 0;
  uint32_t row_bytes = 1024;
};

struct MlpByteTotals {
  uint64_t input_read = 0;
  uint64_t weight_read = 0;
  uint64_t intermediate = 0;
  uint64_t output_write = 0;
  uint64_t weight_grad_write = 0;
};

MlpByteTotals mlp_byte_totals(const MlpTraceSpec& spec);
AccessTrace generate_mlp_trace(const MlpTraceSpec& spec);

// Binary trace: 16-byte header ("NMPTRACE", u32 version, u32 record size)
// then 30-byte little-endian records (id u64, kind u8, address u64, size u32,
// kernel u8, order u64).
inline constexpr char kTraceMagic[8] = {'N', 'M', 'P', 'T', 'R', 'A', 'C', 'E'};
inline constexpr uint32_t kTraceVersion = 1;
inline constexpr uint32_t kTraceRecordBytes = 30;

std::vector<uint8_t> encode_trace(std::span<const MemoryRequest> requests);
std::vector<MemoryRequest> decode_trace(std::span<const uint8_t> bytes);
void write_trace_binary(const std::filesystem::path& path, std::span<const MemoryRequest> requests);
std::vector<MemoryRequest> read_trace_binary(const std::filesystem::path& path);
void write_trace_csv(const std::filesystem::path& path, std::span<const MemoryRequest> requests);

}  // namespace nmpnerf::workload
