#pragma once

// Locality statistics, scenario metrics and machine-readable reports.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "config.hpp"
#include "hashgrid.hpp"

namespace nmpnerf::report {

inline constexpr int kSchemaVersion = 1;

// Buckets: |d| <= 16, 17..5000, > 5000.
struct Histogram {
  std::array<uint64_t, 3> counts{};
  uint64_t pairs() const { return counts[0] + counts[1] + counts[2]; }
  double fraction(size_t bucket) const {
    return pairs() ? double(counts[bucket]) / double(pairs()) : 0.0;
  }
};

size_t distance_bucket(uint64_t distance);

// TableNeighbors: the 7 gaps between a cube's sorted entry indices.
// LatticeEdges: the 12 edge-adjacent vertex pairs of the cube.
std::vector<uint64_t> cube_pair_distances(const std::array<uint64_t, 8>& indices,
                                          HistogramPairs mode);

// Uniform points at uniformly chosen hashed levels. Throws ConfigError when
// the grid has no hashed level.
Histogram neighbor_distance_histogram(const grid::HashGridConfig& grid, grid::HashKind kind,
                                      uint64_t samples, uint64_t seed, HistogramPairs mode);

std::string histogram_csv(const Histogram& morton, const Histogram& xor_hist);

// Mean distinct rows touched by one cube lookup over hashed levels, with the
// level tables laid out back to back.
double row_requests_per_cube(std::span<const grid::Point3> points, const grid::HashGridConfig& grid,
                             uint32_t row_bytes, bool hashed_only = true);

// a / b; empty when b is zero or either side is not finite.
std::optional<double> improvement_ratio(double a, double b);

}  // namespace nmpnerf::report
