#pragma once

// Multiresolution hash-grid geometry and the two vertex index functions
// (XOR spatial hash and Morton / Z-order hash).

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace nmpnerf::grid {

enum class Storage { Dense, Hashed };
enum class HashKind { XorSpatial, Morton };

const char* to_string(HashKind kind);
HashKind hash_kind_from_string(const std::string_view& name);

// Largest lattice coordinate accepted by the Morton path (12 bits).
inline constexpr uint32_t kMaxCoordBits = 12;
inline constexpr uint32_t kMaxCoord = (1u << kMaxCoordBits) - 1;

struct HashPrimes {
  uint32_t p0 = 1;
  uint32_t p1 = 2654435761u;
  uint32_t p2 = 805459861u;
};

struct LevelConfig {
  int level_index = 0;
  uint32_t resolution = 0;  // grid cells per axis
  Storage storage = Storage::Dense;
  uint64_t entries = 0;
};

struct HashGridConfig {
  int levels = 16;
  uint64_t table_size = uint64_t{1} << 19;
  int feature_dim = 2;
  int bytes_per_feature = 2;
  uint32_t base_resolution = 16;
  uint32_t max_resolution = 2048;
  HashKind hash_kind = HashKind::Morton;
  HashPrimes primes;

  double growth_factor() const;
  uint32_t entry_bytes() const { return static_cast<uint32_t>(feature_dim * bytes_per_feature); }

  // Throws ConfigError when any invariant is broken.
  void validate() const;

  // Per-level geometry; N_l = floor(N_min * b^l).
  std::vector<LevelConfig> level_configs() const;
};

struct Point3 {
  std::array<double, 3> x{0.0, 0.0, 0.0};
};

struct VertexCoord {
  std::array<uint32_t, 3> v{0, 0, 0};
  friend bool operator==(const VertexCoord&, const VertexCoord&) = default;
};

struct ScaledPoint {
  VertexCoord base;
  std::array<double, 3> frac{0.0, 0.0, 0.0};
};

// Vertex k has offset (k&1, (k>>1)&1, (k>>2)&1) from the cube base.
struct CubeVertices {
  std::array<VertexCoord, 8> vertices;
  std::array<double, 8> weights{};
};

// Clamp each coordinate into [0, 1).
Point3 clamp_unit(const Point3& p);

ScaledPoint scale_point(const Point3& p, const LevelConfig& lvl);
CubeVertices cube_vertices(const VertexCoord& base, const std::array<double, 3>& fracs);

// Bit i of x lands on bit 3i. Five multiply-and-mask stages over 64 bits;
// accepts x <= kMaxCoord, throws DomainError otherwise.
uint64_t morton_expand(uint32_t x);

// The four-stage 32-bit pipeline with the published constants. Valid for
// x < 2^10 only; throws DomainError otherwise.
uint32_t morton_expand_10bit(uint32_t x);

uint64_t morton_hash(const VertexCoord& v, uint64_t table_size);
uint64_t xor_hash(const VertexCoord& v, uint64_t table_size, const HashPrimes& primes = {});

// Dense levels index row-major; hashed levels use the requested hash.
uint64_t entry_index(const VertexCoord& v, const LevelConfig& lvl, HashKind kind,
                     const HashPrimes& primes = {});

// All eight entry indices of the cube around p at one level, in vertex order.
std::array<uint64_t, 8> cube_entry_indices(const Point3& p, const LevelConfig& lvl, HashKind kind,
                                           const HashPrimes& primes = {});

}  // namespace nmpnerf::grid
