#include "hashgrid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "error.hpp"

namespace nmpnerf::grid {

const char* to_string(HashKind kind) {
  return kind == HashKind::Morton ? "morton" : "xor";
}

HashKind hash_kind_from_string(const std::string_view& name) {
  if (name == "morton") return HashKind::Morton;
  if (name == "xor") return HashKind::XorSpatial;
  throw ConfigError("unknown hash kind '" + std::string(name) + "' (expected morton|xor)");
}

double HashGridConfig::growth_factor() const {
  if (levels <= 1) return 1.0;
  return std::exp((std::log(double(max_resolution)) - std::log(double(base_resolution))) /
                  double(levels - 1));
}

void HashGridConfig::validate() const {
  if (levels < 1) throw ConfigError("grid.levels must be >= 1");
  if (table_size == 0 || (table_size & (table_size - 1)) != 0)
    throw ConfigError("grid table size must be a power of two");
  if (feature_dim < 1) throw ConfigError("grid.feature_dim must be >= 1");
  if (bytes_per_feature < 1) throw ConfigError("grid.bytes_per_feature must be >= 1");
  if (base_resolution < 1) throw ConfigError("grid.base_resolution must be >= 1");
  if (base_resolution > max_resolution)
    throw ConfigError("grid.base_resolution must not exceed grid.max_resolution");
  if (max_resolution > kMaxCoord)
    throw ConfigError("grid.max_resolution exceeds the 12-bit lattice coordinate cap");
  if (levels > 1 && base_resolution == max_resolution)
    throw ConfigError("resolutions must strictly increase across levels");
  auto lv = level_configs();
  for (size_t i = 1; i < lv.size(); ++i)
    if (lv[i].resolution <= lv[i - 1].resolution)
      throw ConfigError("resolutions must strictly increase across levels (level " +
                        std::to_string(i) + ")");
}

std::vector<LevelConfig> HashGridConfig::level_configs() const {
  std::vector<LevelConfig> out;
  out.reserve(size_t(std::max(levels, 0)));
  const double b = growth_factor();
  for (int l = 0; l < levels; ++l) {
    // The epsilon keeps exact powers (e.g. 16 * b^15 = 2048) from flooring down.
    auto n = static_cast<uint32_t>(std::floor(double(base_resolution) * std::pow(b, l) + 1e-9));
    n = std::clamp(n, base_resolution, max_resolution);
    LevelConfig lc;
    lc.level_index = l;
    lc.resolution = n;
    const uint64_t side = uint64_t{n} + 1;
    const uint64_t dense = side * side * side;
    lc.storage = dense <= table_size ? Storage::Dense : Storage::Hashed;
    lc.entries = lc.storage == Storage::Dense ? dense : table_size;
    out.push_back(lc);
  }
  return out;
}

Point3 clamp_unit(const Point3& p) {
  static const double below_one = std::nextafter(1.0, 0.0);
  Point3 q;
  for (int i = 0; i < 3; ++i) q.x[i] = std::clamp(p.x[i], 0.0, below_one);
  return q;
}

ScaledPoint scale_point(const Point3& p, const LevelConfig& lvl) {
  const Point3 q = clamp_unit(p);
  ScaledPoint s;
  const double n = lvl.resolution;
  for (int i = 0; i < 3; ++i) {
    const double scaled = q.x[i] * n;
    auto base = static_cast<uint32_t>(std::floor(scaled));
    base = std::min(base, lvl.resolution - 1);
    s.base.v[i] = base;
    s.frac[i] = std::clamp(scaled - double(base), 0.0, 1.0);
  }
  return s;
}

CubeVertices cube_vertices(const VertexCoord& base, const std::array<double, 3>& fracs) {
  CubeVertices c;
  for (int k = 0; k < 8; ++k) {
    double w = 1.0;
    for (int i = 0; i < 3; ++i) {
      const bool bit = (k >> i) & 1;
      c.vertices[k].v[i] = base.v[i] + (bit ? 1u : 0u);
      w *= bit ? fracs[i] : 1.0 - fracs[i];
    }
    c.weights[k] = w;
  }
  return c;
}

uint64_t morton_expand(uint32_t x) {
  if (x > kMaxCoord)
    throw DomainError("morton_expand: input " + std::to_string(x) + " exceeds 12 bits");
  uint64_t v = x;
  v = (v * 0x0000000100000001ull) & 0x001F00000000FFFFull;
  v = (v * 0x0000000000010001ull) & 0x001F0000FF0000FFull;
  v = (v * 0x0000000000000101ull) & 0x100F00F00F00F00Full;
  v = (v * 0x0000000000000011ull) & 0x10C30C30C30C30C3ull;
  v = (v * 0x0000000000000005ull) & 0x1249249249249249ull;
  return v;
}

uint32_t morton_expand_10bit(uint32_t x) {
  if (x >= (1u << 10))
    throw DomainError("morton_expand_10bit: input " + std::to_string(x) + " exceeds 10 bits");
  static constexpr std::array<uint32_t, 4> p{0x00010001u, 0x00000101u, 0x00000011u, 0x00000005u};
  static constexpr std::array<uint32_t, 4> q{0xFF0000FFu, 0x0F00F00Fu, 0xC30C30C3u, 0x49249249u};
  uint32_t v = x;
  for (size_t n = 0; n < 4; ++n) v = (v * p[n]) & q[n];
  return v;
}

uint64_t morton_hash(const VertexCoord& v, uint64_t table_size) {
  const uint64_t code =
      morton_expand(v.v[0]) + (morton_expand(v.v[1]) << 1) + (morton_expand(v.v[2]) << 2);
  return code & (table_size - 1);
}

uint64_t xor_hash(const VertexCoord& v, uint64_t table_size, const HashPrimes& primes) {
  const uint32_t h = (v.v[0] * primes.p0) ^ (v.v[1] * primes.p1) ^ (v.v[2] * primes.p2);
  return uint64_t{h} & (table_size - 1);
}

uint64_t entry_index(const VertexCoord& v, const LevelConfig& lvl, HashKind kind,
                     const HashPrimes& primes) {
  if (lvl.storage == Storage::Dense) {
    const uint64_t side = uint64_t{lvl.resolution} + 1;
    return v.v[0] + v.v[1] * side + v.v[2] * side * side;
  }
  return kind == HashKind::Morton ? morton_hash(v, lvl.entries) : xor_hash(v, lvl.entries, primes);
}

std::array<uint64_t, 8> cube_entry_indices(const Point3& p, const LevelConfig& lvl, HashKind kind,
                                           const HashPrimes& primes) {
  const ScaledPoint s = scale_point(p, lvl);
  std::array<uint64_t, 8> out{};
  for (int k = 0; k < 8; ++k) {
    VertexCoord v = s.base;
    for (int i = 0; i < 3; ++i) v.v[i] += (k >> i) & 1;
    out[k] = entry_index(v, lvl, kind, primes);
  }
  return out;
}

}  // namespace nmpnerf::grid
