#include "workload.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <fstream>
#include <numbers>
#include <string>

#include "error.hpp"
#include "rng.hpp"

namespace nmpnerf::workload {

using grid::Point3;
using nerf::Vec3;

const char* to_string(Kernel k) {
  switch (k) {
    case Kernel::HT: return "HT";
    case Kernel::HT_b: return "HT_b";
    case Kernel::MLP: return "MLP";
    case Kernel::MLP_b: return "MLP_b";
  }
  return "?";
}

const char* to_string(StreamOrder o) {
  return o == StreamOrder::RayFirst ? "ray_first" : "random";
}

const char* to_string(SceneKind s) {
  switch (s) {
    case SceneKind::Orbit: return "orbit";
    case SceneKind::Forward: return "forward";
    case SceneKind::Object: return "object";
  }
  return "?";
}

StreamOrder stream_order_from_string(std::string_view name) {
  if (name == "ray_first") return StreamOrder::RayFirst;
  if (name == "random") return StreamOrder::RandomShuffle;
  throw ConfigError("unknown stream order '" + std::string(name) + "' (expected ray_first|random)");
}

SceneKind scene_kind_from_string(std::string_view name) {
  if (name == "orbit") return SceneKind::Orbit;
  if (name == "forward") return SceneKind::Forward;
  if (name == "object") return SceneKind::Object;
  throw ConfigError("unknown scene '" + std::string(name) + "' (expected orbit|forward|object)");
}

uint64_t AccessTrace::total_bytes() const {
  uint64_t sum = 0;
  for (const auto& r : requests) sum += r.size;
  return sum;
}

namespace {

uint64_t round_up(uint64_t v, uint64_t m) { return (v + m - 1) / m * m; }

}  // namespace

TableLayout TableLayout::make(const std::vector<grid::LevelConfig>& levels, uint32_t entry_bytes,
                              uint32_t row_bytes) {
  if (row_bytes == 0 || !std::has_single_bit(row_bytes))
    throw ConfigError("row_bytes must be a power of two");
  TableLayout t;
  t.entry_bytes = entry_bytes;
  t.row_bytes = row_bytes;
  uint64_t cursor = 0;
  for (const auto& lv : levels) {
    t.level_offset.push_back(cursor);
    const uint64_t bytes = lv.entries * entry_bytes;
    t.level_bytes.push_back(bytes);
    cursor += round_up(bytes, row_bytes);
  }
  t.activation_base = cursor;
  return t;
}

int TableLayout::level_of(uint64_t address) const {
  if (address >= activation_base) return -1;
  auto it = std::upper_bound(level_offset.begin(), level_offset.end(), address);
  return int(it - level_offset.begin()) - 1;
}

uint64_t RayBatch::point_count() const {
  uint64_t n = 0;
  for (const auto& r : rays) n += r.size();
  return n;
}

namespace {

Vec3 normalize(const Vec3& v) {
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  return {v[0] / n, v[1] / n, v[2] / n};
}

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

// Direction through a random pixel of a pinhole camera looking along `forward`.
Vec3 jittered_direction(const Vec3& forward, double fov_deg, Rng& rng) {
  const Vec3 f = normalize(forward);
  const Vec3 helper = std::abs(f[1]) < 0.9 ? Vec3{0, 1, 0} : Vec3{1, 0, 0};
  const Vec3 right = normalize(cross(f, helper));
  const Vec3 up = cross(right, f);
  const double half = std::tan(fov_deg * std::numbers::pi / 360.0);
  const double u = uniform_draw(rng, -half, half);
  const double v = uniform_draw(rng, -half, half);
  return normalize({f[0] + u * right[0] + v * up[0], f[1] + u * right[1] + v * up[1],
                    f[2] + u * right[2] + v * up[2]});
}

bool intersect_sphere(const Vec3& o, const Vec3& d, const Vec3& c, double radius, double& t0,
                      double& t1) {
  const Vec3 oc{o[0] - c[0], o[1] - c[1], o[2] - c[2]};
  const double b = oc[0] * d[0] + oc[1] * d[1] + oc[2] * d[2];
  const double cc = oc[0] * oc[0] + oc[1] * oc[1] + oc[2] * oc[2] - radius * radius;
  const double disc = b * b - cc;
  if (disc <= 0.0) return false;
  const double s = std::sqrt(disc);
  t0 = -b - s;
  t1 = -b + s;
  return t1 > 0.0;
}

Vec3 orbit_position(Rng& rng, double radius) {
  const double theta = uniform_draw(rng, 0.3 * std::numbers::pi, 0.7 * std::numbers::pi);
  const double phi = uniform_draw(rng, 0.0, 2.0 * std::numbers::pi);
  return {0.5 + radius * std::sin(theta) * std::cos(phi), 0.5 + radius * std::cos(theta),
          0.5 + radius * std::sin(theta) * std::sin(phi)};
}

}  // namespace

// Orbit: cameras on a sphere around the box looking at its center.
// Forward: a front-facing rig on the z = -0.4 plane looking down +z.
// Object: orbit cameras sampling only inside a central sphere of radius 0.35.
RayBatch synthesize_scene(SceneKind kind, int rays, int samples_per_ray, uint64_t seed) {
  if (rays < 0 || samples_per_ray < 1) throw ConfigError("scene needs rays >= 0 and samples >= 1");
  Rng rng(seed);
  RayBatch batch;
  batch.rays.reserve(size_t(rays));
  const Vec3 center{0.5, 0.5, 0.5};
  constexpr int kMaxAttempts = 10000;
  for (int r = 0; r < rays; ++r) {
    std::vector<Point3> pts;
    for (int attempt = 0; attempt < kMaxAttempts && pts.empty(); ++attempt) {
      Vec3 origin;
      Vec3 dir;
      double t0 = 0.0;
      double t1 = 0.0;
      bool hit = false;
      switch (kind) {
        case SceneKind::Orbit: {
          origin = orbit_position(rng, 1.6);
          dir = jittered_direction({center[0] - origin[0], center[1] - origin[1],
                                    center[2] - origin[2]}, 40.0, rng);
          hit = nerf::intersect_unit_box(origin, dir, t0, t1);
          break;
        }
        case SceneKind::Forward: {
          origin = {uniform_draw(rng, 0.3, 0.7), uniform_draw(rng, 0.3, 0.7), -0.4};
          dir = jittered_direction({0.0, 0.0, 1.0}, 50.0, rng);
          hit = nerf::intersect_unit_box(origin, dir, t0, t1);
          break;
        }
        case SceneKind::Object: {
          origin = orbit_position(rng, 2.0);
          dir = jittered_direction({center[0] - origin[0], center[1] - origin[1],
                                    center[2] - origin[2]}, 30.0, rng);
          hit = intersect_sphere(origin, dir, center, 0.35, t0, t1);
          break;
        }
      }
      if (!hit || t1 <= t0) continue;
      t0 = std::max(t0, 0.0);
      pts = nerf::ray_points(nerf::sample_segment(origin, dir, t0, t1, samples_per_ray));
    }
    if (pts.empty()) throw InvariantViolation("scene synthesis failed to find a hitting ray");
    batch.rays.push_back(std::move(pts));
  }
  return batch;
}

std::vector<Point3> uniform_points(uint64_t n, uint64_t seed) {
  Rng rng(seed);
  std::vector<Point3> out(n);
  for (auto& p : out)
    for (auto& c : p.x) c = unit_draw(rng);
  return out;
}

std::vector<Point3> order_points(const RayBatch& batch, StreamOrder mode, uint64_t seed) {
  std::vector<Point3> out;
  out.reserve(batch.point_count());
  for (const auto& ray : batch.rays) out.insert(out.end(), ray.begin(), ray.end());
  if (mode == StreamOrder::RandomShuffle) {
    Rng rng(seed);
    shuffle_in_place(out, rng);
  }
  return out;
}

namespace {

// Last k cubes per level, most recent first.
class CubeRegister {
 public:
  explicit CubeRegister(uint32_t capacity) : capacity_(std::max<uint32_t>(capacity, 1)) {}

  bool holds(uint64_t index) const {
    for (const auto& cube : cubes_)
      if (std::find(cube.begin(), cube.end(), index) != cube.end()) return true;
    return false;
  }

  void insert(const std::array<uint64_t, 8>& cube) {
    cubes_.push_front(cube);
    if (cubes_.size() > capacity_) cubes_.pop_back();
  }

 private:
  uint32_t capacity_;
  std::deque<std::array<uint64_t, 8>> cubes_;
};

}  // namespace

AccessTrace generate_ht_trace(std::span<const Point3> stream, const grid::HashGridConfig& grid,
                              const TableLayout& layout, const HtTraceOptions& options) {
  if (options.kernel != Kernel::HT && options.kernel != Kernel::HT_b)
    throw ConfigError("generate_ht_trace needs kernel HT or HT_b");
  const auto levels = grid.level_configs();
  if (layout.level_offset.size() != levels.size())
    throw ConfigError("table layout does not match the grid level count");

  AccessTrace trace;
  trace.meta.points = stream.size();
  trace.meta.levels = uint32_t(levels.size());
  trace.meta.cube_lookups = stream.size() * levels.size();
  trace.meta.entry_lookups = trace.meta.cube_lookups * 8;
  trace.meta.consumed_bytes = trace.meta.entry_lookups * layout.entry_bytes;

  std::vector<CubeRegister> registers(levels.size(), CubeRegister(options.register_capacity));
  std::vector<uint64_t> missed;
  missed.reserve(8);
  uint64_t group = 0;
  uint64_t next_id = 0;

  auto emit = [&](RequestKind kind, uint64_t index, size_t level, uint32_t& slot) {
    MemoryRequest r;
    r.id = next_id++;
    r.kind = kind;
    r.address = layout.level_offset[level] + index * layout.entry_bytes;
    r.size = layout.entry_bytes;
    r.kernel = options.kernel;
    r.order = (group << kSlotBits) | slot++;
    trace.requests.push_back(r);
  };

  for (const Point3& p : stream) {
    for (size_t l = 0; l < levels.size(); ++l, ++group) {
      const auto idx = grid::cube_entry_indices(p, levels[l], grid.hash_kind, grid.primes);
      missed.clear();
      if (options.register_on) {
        for (uint64_t i : idx) {
          if (registers[l].holds(i))
            ++trace.meta.register_hits;
          else
            missed.push_back(i);
        }
        std::sort(missed.begin(), missed.end());
        missed.erase(std::unique(missed.begin(), missed.end()), missed.end());
        registers[l].insert(idx);
      } else {
        missed.assign(idx.begin(), idx.end());
        std::sort(missed.begin(), missed.end());
      }
      uint32_t slot = 0;
      for (uint64_t i : missed) emit(RequestKind::Read, i, l, slot);
      if (options.kernel == Kernel::HT_b)
        for (uint64_t i : missed) emit(RequestKind::Write, i, l, slot);
    }
  }
  return trace;
}

CoalescedTrace coalesce_to_rows(const AccessTrace& trace, uint32_t row_bytes) {
  if (row_bytes == 0 || !std::has_single_bit(row_bytes))
    throw ConfigError("row_bytes must be a power of two");
  CoalescedTrace out;
  out.trace.meta = trace.meta;
  out.stats.input_requests = trace.requests.size();
  uint64_t prev_group = UINT64_MAX;
  uint32_t slot = 0;
  for (const auto& r : trace.requests) {
    const uint64_t g = r.group();
    const uint64_t row = r.address / row_bytes;
    if (g != prev_group) {
      ++out.stats.groups;
      prev_group = g;
      slot = 0;
    } else {
      auto& last = out.trace.requests.back();
      if (last.kind == r.kind && last.address / row_bytes == row) {
        last.size += r.size;
        continue;
      }
    }
    MemoryRequest m = r;
    m.id = out.trace.requests.size();
    m.order = (g << kSlotBits) | slot++;
    out.trace.requests.push_back(m);
  }
  out.stats.row_requests = out.trace.requests.size();
  return out;
}

namespace {

struct MlpShape {
  uint64_t in_width = 0;
  uint64_t out_width = 0;
  uint64_t max_hidden = 0;
  uint64_t weights = 0;
};

MlpShape mlp_shape(const MlpTraceSpec& spec) {
  if (spec.layers.empty()) throw ConfigError("MLP trace needs at least one layer");
  MlpShape s;
  s.in_width = uint64_t(spec.layers.front().in);
  s.out_width = uint64_t(spec.layers.back().out);
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    s.weights += uint64_t(spec.layers[i].in) * uint64_t(spec.layers[i].out);
    if (i + 1 < spec.layers.size()) s.max_hidden = std::max<uint64_t>(s.max_hidden, spec.layers[i].out);
  }
  return s;
}

}  // namespace

MlpByteTotals mlp_byte_totals(const MlpTraceSpec& spec) {
  const MlpShape s = mlp_shape(spec);
  const uint64_t tile = std::max<uint32_t>(spec.tile_points, 1);
  const uint64_t tiles = (spec.points + tile - 1) / tile;
  const uint64_t bpv = spec.bytes_per_value;
  MlpByteTotals t;
  t.weight_read = tiles * s.weights * bpv;
  t.intermediate = spec.points * s.max_hidden * bpv;
  if (spec.kernel == Kernel::MLP) {
    t.input_read = spec.points * s.in_width * bpv;
    t.output_write = spec.points * s.out_width * bpv;
  } else {
    // Backward reads output gradients and writes input gradients.
    t.input_read = spec.points * s.out_width * bpv;
    t.output_write = spec.points * s.in_width * bpv;
    t.weight_grad_write = s.weights * spec.grad_bytes;
  }
  return t;
}

// Forward tile: read inputs, read weights, write hidden activations, write outputs.
// Backward tile: read output gradients, read weights, read hidden activations,
// write input gradients; weight-gradient partial sums are written once at the end.
AccessTrace generate_mlp_trace(const MlpTraceSpec& spec) {
  if (spec.kernel != Kernel::MLP && spec.kernel != Kernel::MLP_b)
    throw ConfigError("generate_mlp_trace needs kernel MLP or MLP_b");
  if (spec.row_bytes == 0 || !std::has_single_bit(spec.row_bytes))
    throw ConfigError("row_bytes must be a power of two");
  const MlpShape s = mlp_shape(spec);
  const uint64_t bpv = spec.bytes_per_value;
  const uint64_t tile = std::max<uint32_t>(spec.tile_points, 1);
  const uint64_t rb = spec.row_bytes;

  const uint64_t in_region = spec.base_address;
  const uint64_t hidden_region = in_region + round_up(spec.points * s.in_width * bpv, rb);
  const uint64_t out_region = hidden_region + round_up(spec.points * s.max_hidden * bpv, rb);
  const uint64_t weight_region = out_region + round_up(spec.points * s.out_width * bpv, rb);
  const uint64_t wgrad_region = weight_region + round_up(s.weights * bpv, rb);

  AccessTrace trace;
  trace.meta.points = spec.points;
  uint64_t group = 0;
  uint32_t slot = 0;

  auto stream = [&](RequestKind kind, uint64_t addr, uint64_t bytes) {
    while (bytes > 0) {
      const uint64_t chunk = std::min(bytes, rb - addr % rb);
      MemoryRequest r;
      r.id = trace.requests.size();
      r.kind = kind;
      r.address = addr;
      r.size = uint32_t(chunk);
      r.kernel = spec.kernel;
      r.order = (group << kSlotBits) | slot++;
      trace.requests.push_back(r);
      addr += chunk;
      bytes -= chunk;
    }
  };

  const bool fwd = spec.kernel == Kernel::MLP;
  for (uint64_t first = 0; first < spec.points; first += tile, ++group) {
    const uint64_t n = std::min(tile, spec.points - first);
    slot = 0;
    if (fwd) {
      stream(RequestKind::Read, in_region + first * s.in_width * bpv, n * s.in_width * bpv);
      stream(RequestKind::Read, weight_region, s.weights * bpv);
      stream(RequestKind::Write, hidden_region + first * s.max_hidden * bpv, n * s.max_hidden * bpv);
      stream(RequestKind::Write, out_region + first * s.out_width * bpv, n * s.out_width * bpv);
    } else {
      stream(RequestKind::Read, out_region + first * s.out_width * bpv, n * s.out_width * bpv);
      stream(RequestKind::Read, weight_region, s.weights * bpv);
      stream(RequestKind::Read, hidden_region + first * s.max_hidden * bpv, n * s.max_hidden * bpv);
      stream(RequestKind::Write, in_region + first * s.in_width * bpv, n * s.in_width * bpv);
    }
  }
  if (!fwd && spec.points > 0) {
    slot = 0;
    stream(RequestKind::Write, wgrad_region, s.weights * spec.grad_bytes);
  }
  trace.meta.consumed_bytes = trace.total_bytes();
  return trace;
}

namespace {

template <class T>
void put_le(std::vector<uint8_t>& out, T v) {
  for (size_t i = 0; i < sizeof(T); ++i) out.push_back(uint8_t(uint64_t(v) >> (8 * i)));
}

template <class T>
T get_le(const uint8_t* p) {
  uint64_t v = 0;
  for (size_t i = 0; i < sizeof(T); ++i) v |= uint64_t(p[i]) << (8 * i);
  return T(v);
}

}  // namespace

std::vector<uint8_t> encode_trace(std::span<const MemoryRequest> requests) {
  std::vector<uint8_t> out;
  out.reserve(16 + requests.size() * kTraceRecordBytes);
  out.insert(out.end(), std::begin(kTraceMagic), std::end(kTraceMagic));
  put_le<uint32_t>(out, kTraceVersion);
  put_le<uint32_t>(out, kTraceRecordBytes);
  for (const auto& r : requests) {
    put_le<uint64_t>(out, r.id);
    put_le<uint8_t>(out, uint8_t(r.kind));
    put_le<uint64_t>(out, r.address);
    put_le<uint32_t>(out, r.size);
    put_le<uint8_t>(out, uint8_t(r.kernel));
    put_le<uint64_t>(out, r.order);
  }
  return out;
}

std::vector<MemoryRequest> decode_trace(std::span<const uint8_t> bytes) {
  if (bytes.size() < 16) throw ParseError("trace header truncated");
  if (!std::equal(std::begin(kTraceMagic), std::end(kTraceMagic), bytes.begin()))
    throw ParseError("trace header: bad magic");
  const auto version = get_le<uint32_t>(bytes.data() + 8);
  if (version != kTraceVersion)
    throw ParseError("trace header: unsupported version " + std::to_string(version));
  const auto record = get_le<uint32_t>(bytes.data() + 12);
  if (record != kTraceRecordBytes)
    throw ParseError("trace header: unexpected record size " + std::to_string(record));
  const size_t body = bytes.size() - 16;
  if (body % kTraceRecordBytes != 0) throw ParseError("trace body truncated");
  std::vector<MemoryRequest> out(body / kTraceRecordBytes);
  const uint8_t* p = bytes.data() + 16;
  for (auto& r : out) {
    r.id = get_le<uint64_t>(p);
    const uint8_t kind = p[8];
    r.address = get_le<uint64_t>(p + 9);
    r.size = get_le<uint32_t>(p + 17);
    const uint8_t kernel = p[21];
    r.order = get_le<uint64_t>(p + 22);
    if (kind > 1) throw ParseError("trace record " + std::to_string(r.id) + ": bad kind");
    if (kernel > 3) throw ParseError("trace record " + std::to_string(r.id) + ": bad kernel");
    r.kind = RequestKind(kind);
    r.kernel = Kernel(kernel);
    p += kTraceRecordBytes;
  }
  return out;
}

void write_trace_binary(const std::filesystem::path& path, std::span<const MemoryRequest> requests) {
  const auto bytes = encode_trace(requests);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

std::vector<MemoryRequest> read_trace_binary(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_trace(bytes);
}

void write_trace_csv(const std::filesystem::path& path, std::span<const MemoryRequest> requests) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << "id,kind,address,size,kernel,order\n";
  for (const auto& r : requests)
    f << r.id << ',' << (r.kind == RequestKind::Read ? "R" : "W") << ',' << r.address << ','
      << r.size << ',' << to_string(r.kernel) << ',' << r.order << '\n';
  if (!f) throw IoError("write failed: " + path.string());
}

}  // namespace nmpnerf::workload
