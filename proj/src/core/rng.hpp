#pragma once

// Portable draws on top of std::mt19937_64. The engine's output sequence is
// fixed by the standard; the distribution adaptors are not, so reproducible
// traces use these instead.

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace nmpnerf {

using Rng = std::mt19937_64;

inline double unit_draw(Rng& rng) {
  return double(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_draw(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * unit_draw(rng);
}

// Unbiased draw in [0, n) by rejection.
inline uint64_t bounded_draw(Rng& rng, uint64_t n) {
  if (n <= 1) return 0;
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return r % n;
}

template <class T>
void shuffle_in_place(std::vector<T>& items, Rng& rng) {
  for (size_t i = items.size(); i > 1; --i) {
    const size_t j = bounded_draw(rng, i);
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace nmpnerf
