#include <doctest.h>

#include <cmath>

#include "error.hpp"
#include "hashgrid.hpp"

using namespace nmpnerf;
using namespace nmpnerf::grid;

namespace {

uint64_t scatter_oracle(uint32_t x) {
  uint64_t out = 0;
  for (uint32_t i = 0; i < 32; ++i)
    if ((x >> i) & 1u) out |= uint64_t{1} << (3 * i);
  return out;
}

LevelConfig dense16() {
  LevelConfig l;
  l.resolution = 16;
  l.storage = Storage::Dense;
  l.entries = 17 * 17 * 17;
  return l;
}

VertexCoord vc(uint32_t x, uint32_t y, uint32_t z) {
  VertexCoord v;
  v.v = {x, y, z};
  return v;
}

}  // namespace

TEST_CASE("morton_expand against the bit-scatter oracle") {
  CHECK(morton_expand(0b1011) == 0b1000001001);
  CHECK(morton_expand(11) == 521);
  CHECK(morton_expand(0) == 0);
  CHECK(morton_expand(1023) == 0x09249249);
  for (uint32_t x = 0; x <= kMaxCoord; ++x) REQUIRE(morton_expand(x) == scatter_oracle(x));
  CHECK_THROWS_AS(morton_expand(kMaxCoord + 1), DomainError);
}

TEST_CASE("the 32-bit four-stage pipeline agrees below 2^10") {
  for (uint32_t x = 0; x < 1024; ++x) REQUIRE(morton_expand_10bit(x) == scatter_oracle(x));
  CHECK_THROWS_AS(morton_expand_10bit(1024), DomainError);
}

TEST_CASE("morton_hash") {
  const uint64_t T = 1u << 19;
  CHECK(morton_hash(vc(0, 0, 0), T) == 0);
  CHECK(morton_hash(vc(0, 0, 0), 64) == 0);
  CHECK(morton_hash(vc(1, 1, 1), T) == 7);
  CHECK(morton_hash(vc(1, 0, 0), T) == 1);
  CHECK(morton_hash(vc(0, 0, 1), T) == 4);
  CHECK(morton_hash(vc(0, 1, 0), T) == 2);
}

TEST_CASE("xor_hash") {
  const uint64_t T = 1u << 19;
  CHECK(xor_hash(vc(0, 0, 0), T) == 0);
  CHECK(xor_hash(vc(1, 0, 0), T) == 1);
  CHECK(xor_hash(vc(1, 1, 1), T) == 339493);
  // 32-bit wraparound of the products.
  const uint32_t h = (5u * 1u) ^ (7u * 2654435761u) ^ (9u * 805459861u);
  CHECK(xor_hash(vc(5, 7, 9), T) == (h & (T - 1)));
}

TEST_CASE("entry_index on dense and hashed levels") {
  CHECK(entry_index(vc(1, 2, 3), dense16(), HashKind::Morton) == 902);
  CHECK(entry_index(vc(16, 16, 16), dense16(), HashKind::XorSpatial) == 4912);
  LevelConfig h;
  h.resolution = 256;
  h.storage = Storage::Hashed;
  h.entries = 1u << 19;
  CHECK(entry_index(vc(0, 0, 0), h, HashKind::Morton) == 0);
  CHECK(entry_index(vc(3, 1, 2), h, HashKind::Morton) == morton_hash(vc(3, 1, 2), 1u << 19));
}

TEST_CASE("scale_point") {
  const auto l = dense16();
  Point3 p;
  auto s = scale_point(p, l);
  CHECK(s.base == vc(0, 0, 0));
  CHECK(s.frac[0] == 0.0);

  p.x = {0.5, 0.5, 0.5};
  s = scale_point(p, l);
  CHECK(s.base == vc(8, 8, 8));
  CHECK(s.frac[2] == doctest::Approx(0.0));

  p.x = {0.53, 0.10, 0.99};
  s = scale_point(p, l);
  CHECK(s.base == vc(8, 1, 15));
  CHECK(s.frac[0] == doctest::Approx(0.48));
  CHECK(s.frac[1] == doctest::Approx(0.60));
  CHECK(s.frac[2] == doctest::Approx(0.84));
}

TEST_CASE("cube_vertices weights") {
  auto c = cube_vertices(vc(0, 0, 0), {0, 0, 0});
  CHECK(c.weights[0] == 1.0);
  for (int k = 1; k < 8; ++k) CHECK(c.weights[size_t(k)] == 0.0);

  c = cube_vertices(vc(2, 3, 4), {0.5, 0.5, 0.5});
  for (double w : c.weights) CHECK(w == doctest::Approx(0.125));
  CHECK(c.vertices[7] == vc(3, 4, 5));
  CHECK(c.vertices[2] == vc(2, 4, 4));

  c = cube_vertices(vc(0, 0, 0), {0.25, 0.5, 0.0});
  CHECK(c.weights[0] == doctest::Approx(0.375));
  CHECK(c.weights[1] == doctest::Approx(0.125));
  double sum = 0;
  for (double w : c.weights) sum += w;
  CHECK(sum == doctest::Approx(1.0));
}

TEST_CASE("default level geometry") {
  HashGridConfig g;
  const auto lv = g.level_configs();
  REQUIRE(lv.size() == 16);
  CHECK(lv.front().resolution == 16);
  CHECK(lv.back().resolution == 2048);
  for (size_t i = 0; i < lv.size(); ++i) {
    const uint64_t side = uint64_t{lv[i].resolution} + 1;
    const bool dense = side * side * side <= g.table_size;
    CHECK((lv[i].storage == Storage::Dense) == dense);
    CHECK(lv[i].entries == (dense ? side * side * side : g.table_size));
  }
  int n_dense = 0;
  for (const auto& l : lv) n_dense += l.storage == Storage::Dense;
  CHECK(n_dense == 5);
}

TEST_CASE("config validation") {
  HashGridConfig g;
  g.table_size = 1000;
  CHECK_THROWS_AS(g.validate(), ConfigError);
  g = HashGridConfig{};
  g.max_resolution = 8192;
  CHECK_THROWS_AS(g.validate(), ConfigError);
  g = HashGridConfig{};
  CHECK_NOTHROW(g.validate());
}

TEST_CASE("cube indices stay in range") {
  HashGridConfig g;
  const auto lv = g.level_configs();
  Point3 p;
  p.x = {0.999999, 0.0, 0.5};
  for (const auto& l : lv)
    for (auto kind : {HashKind::Morton, HashKind::XorSpatial})
      for (uint64_t i : cube_entry_indices(p, l, kind)) CHECK(i < l.entries);
}
