#include "report.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "error.hpp"
#include "rng.hpp"
#include "workload.hpp"

namespace nmpnerf::report {

size_t distance_bucket(uint64_t d) {
  if (d <= 16) return 0;
  if (d <= 5000) return 1;
  return 2;
}

namespace {

uint64_t absdiff(uint64_t a, uint64_t b) { return a > b ? a - b : b - a; }

}  // namespace

std::vector<uint64_t> cube_pair_distances(const std::array<uint64_t, 8>& idx, HistogramPairs mode) {
  std::vector<uint64_t> out;
  if (mode == HistogramPairs::TableNeighbors) {
    auto sorted = idx;
    std::sort(sorted.begin(), sorted.end());
    for (size_t i = 1; i < 8; ++i) out.push_back(sorted[i] - sorted[i - 1]);
    return out;
  }
  for (int k = 0; k < 8; ++k)
    for (int bit = 0; bit < 3; ++bit)
      if (!((k >> bit) & 1)) out.push_back(absdiff(idx[size_t(k)], idx[size_t(k | (1 << bit))]));
  return out;
}

Histogram neighbor_distance_histogram(const grid::HashGridConfig& g, grid::HashKind kind,
                                      uint64_t samples, uint64_t seed, HistogramPairs mode) {
  std::vector<grid::LevelConfig> hashed;
  for (const auto& lv : g.level_configs())
    if (lv.storage == grid::Storage::Hashed) hashed.push_back(lv);
  if (hashed.empty()) throw ConfigError("locality histogram needs at least one hashed level");
  Rng rng(seed);
  Histogram h;
  for (uint64_t s = 0; s < samples; ++s) {
    const auto& lv = hashed[bounded_draw(rng, hashed.size())];
    grid::Point3 p;
    for (auto& c : p.x) c = unit_draw(rng);
    const auto idx = grid::cube_entry_indices(p, lv, kind, g.primes);
    for (uint64_t d : cube_pair_distances(idx, mode)) ++h.counts[distance_bucket(d)];
  }
  return h;
}

std::string histogram_csv(const Histogram& morton, const Histogram& xor_hist) {
  static const char* names[3] = {"<=16", "17-5000", ">5000"};
  std::ostringstream os;
  os << "bucket,morton_count,morton_fraction,xor_count,xor_fraction\n";
  for (size_t b = 0; b < 3; ++b)
    os << names[b] << ',' << morton.counts[b] << ',' << morton.fraction(b) << ','
       << xor_hist.counts[b] << ',' << xor_hist.fraction(b) << '\n';
  return os.str();
}

double row_requests_per_cube(std::span<const grid::Point3> points, const grid::HashGridConfig& g,
                             uint32_t row_bytes, bool hashed_only) {
  const auto levels = g.level_configs();
  const auto layout = workload::TableLayout::make(levels, g.entry_bytes(), row_bytes);
  uint64_t rows = 0;
  uint64_t cubes = 0;
  std::array<uint64_t, 8> r{};
  for (const auto& p : points) {
    for (size_t l = 0; l < levels.size(); ++l) {
      if (hashed_only && levels[l].storage != grid::Storage::Hashed) continue;
      const auto idx = grid::cube_entry_indices(p, levels[l], g.hash_kind, g.primes);
      for (size_t k = 0; k < 8; ++k)
        r[k] = (layout.level_offset[l] + idx[k] * layout.entry_bytes) / row_bytes;
      std::sort(r.begin(), r.end());
      rows += uint64_t(std::unique(r.begin(), r.end()) - r.begin());
      ++cubes;
    }
  }
  return cubes ? double(rows) / double(cubes) : 0.0;
}

std::optional<double> improvement_ratio(double a, double b) {
  if (b == 0.0 || !std::isfinite(a) || !std::isfinite(b)) return std::nullopt;
  return a / b;
}

}  // namespace nmpnerf::report
