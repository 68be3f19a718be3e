#include <doctest.h>

#include <set>

#include "error.hpp"
#include "workload.hpp"

using namespace nmpnerf;
using namespace nmpnerf::workload;

namespace {

grid::Point3 pt(double x, double y, double z) {
  grid::Point3 p;
  p.x = {x, y, z};
  return p;
}

TableLayout layout_for(const grid::HashGridConfig& g, uint32_t row = 1024) {
  return TableLayout::make(g.level_configs(), g.entry_bytes(), row);
}

RayBatch two_by_three() {
  RayBatch b;
  for (int r = 0; r < 2; ++r) {
    std::vector<grid::Point3> ray;
    for (int i = 0; i < 3; ++i) ray.push_back(pt(0.1 * r, 0.1 * i, 0.5));
    b.rays.push_back(ray);
  }
  return b;
}

}  // namespace

TEST_CASE("table layout is row aligned and in level order") {
  grid::HashGridConfig g;
  const auto lay = layout_for(g);
  const auto lv = g.level_configs();
  REQUIRE(lay.level_offset.size() == lv.size());
  for (size_t l = 0; l < lv.size(); ++l) {
    CHECK(lay.level_offset[l] % 1024 == 0);
    CHECK(lay.level_bytes[l] == lv[l].entries * 4);
    if (l) CHECK(lay.level_offset[l] >= lay.level_offset[l - 1] + lay.level_bytes[l - 1]);
    CHECK(lay.level_of(lay.level_offset[l]) == int(l));
  }
  CHECK(lay.level_of(lay.activation_base) == -1);
}

TEST_CASE("order_points") {
  const auto b = two_by_three();
  const auto rf = order_points(b, StreamOrder::RayFirst, 1);
  REQUIRE(rf.size() == 6);
  for (int r = 0; r < 2; ++r)
    for (int i = 0; i < 3; ++i) {
      CHECK(rf[size_t(r * 3 + i)].x[0] == doctest::Approx(0.1 * r));
      CHECK(rf[size_t(r * 3 + i)].x[1] == doctest::Approx(0.1 * i));
    }
  const auto s1 = order_points(b, StreamOrder::RandomShuffle, 9);
  const auto s2 = order_points(b, StreamOrder::RandomShuffle, 9);
  REQUIRE(s1.size() == 6);
  for (size_t i = 0; i < 6; ++i) CHECK(s1[i].x == s2[i].x);
  std::multiset<std::array<double, 3>> a, c;
  for (const auto& p : rf) a.insert(p.x);
  for (const auto& p : s1) c.insert(p.x);
  CHECK(a == c);

  RayBatch one;
  one.rays.push_back(b.rays[0]);
  const auto o = order_points(one, StreamOrder::RayFirst, 1);
  for (size_t i = 0; i < 3; ++i) CHECK(o[i].x == b.rays[0][i].x);
}

TEST_CASE("synthetic scenes are deterministic and inside the box") {
  for (auto kind : {SceneKind::Orbit, SceneKind::Forward, SceneKind::Object}) {
    const auto a = synthesize_scene(kind, 8, 16, 4);
    const auto b = synthesize_scene(kind, 8, 16, 4);
    REQUIRE(a.rays.size() == 8);
    CHECK(a.point_count() == 128);
    for (size_t r = 0; r < 8; ++r)
      for (size_t i = 0; i < a.rays[r].size(); ++i) {
        CHECK(a.rays[r][i].x == b.rays[r][i].x);
        for (double c : a.rays[r][i].x) {
          CHECK(c >= 0.0);
          CHECK(c < 1.0);
        }
      }
  }
  CHECK(synthesize_scene(SceneKind::Orbit, 0, 4, 1).point_count() == 0);
}

TEST_CASE("cube register") {
  grid::HashGridConfig g;
  const auto lay = layout_for(g);
  const std::vector<grid::Point3> twice{pt(0.3, 0.4, 0.5), pt(0.3, 0.4, 0.5)};
  auto t = generate_ht_trace(twice, g, lay, {true, 1, Kernel::HT});
  for (const auto& r : t.requests) CHECK(r.group() < uint64_t(g.levels));
  CHECK(t.meta.register_hits == 8u * 16u);

  t = generate_ht_trace(twice, g, lay, {false, 1, Kernel::HT});
  CHECK(t.requests.size() == 2u * 16u * 8u);
  CHECK(t.meta.register_hits == 0);

  // 33 samples crossing 4 cells of the coarsest level.
  std::vector<grid::Point3> ray;
  for (int i = 0; i <= 32; ++i) ray.push_back(pt(0.01 + 0.23 * i / 32.0, 0.52, 0.52));
  t = generate_ht_trace(ray, g, lay, {true, 1, Kernel::HT});
  std::set<uint64_t> level0_groups;
  for (const auto& r : t.requests)
    if (r.group() % 16 == 0) level0_groups.insert(r.group());
  CHECK(level0_groups.size() == 4);
}

TEST_CASE("HT_b emits reads then writes") {
  grid::HashGridConfig g;
  const std::vector<grid::Point3> p{pt(0.2, 0.2, 0.2)};
  const auto t = generate_ht_trace(p, g, layout_for(g), {false, 1, Kernel::HT_b});
  REQUIRE(t.requests.size() == 16u * 16u);
  for (size_t i = 0; i < t.requests.size(); ++i)
    CHECK(t.requests[i].kind == (i % 16 < 8 ? RequestKind::Read : RequestKind::Write));
  for (size_t i = 1; i < t.requests.size(); ++i) CHECK(t.requests[i].order > t.requests[i - 1].order);
}

TEST_CASE("coalesce_to_rows") {
  AccessTrace one_row;
  for (uint64_t i = 0; i < 8; ++i) one_row.requests.push_back({i, RequestKind::Read, i * 4, 4, Kernel::HT, i});
  auto c = coalesce_to_rows(one_row, 1024);
  REQUIRE(c.trace.requests.size() == 1);
  CHECK(c.trace.requests[0].size == 32);
  CHECK(c.stats.groups == 1);

  AccessTrace spread;
  for (uint64_t i = 0; i < 8; ++i)
    spread.requests.push_back({i, RequestKind::Read, i * 1024, 4, Kernel::HT, i});
  c = coalesce_to_rows(spread, 1024);
  CHECK(c.trace.requests.size() == 8);

  // Different groups never merge.
  AccessTrace groups;
  groups.requests.push_back({0, RequestKind::Read, 0, 4, Kernel::HT, 0});
  groups.requests.push_back({1, RequestKind::Read, 4, 4, Kernel::HT, uint64_t{1} << kSlotBits});
  CHECK(coalesce_to_rows(groups, 1024).trace.requests.size() == 2);
  CHECK_THROWS_AS(coalesce_to_rows(groups, 1000), ConfigError);
}

TEST_CASE("MLP trace byte totals") {
  MlpTraceSpec s;
  nerf::MlpConfig m;
  s.layers = nerf::density_layers(m, 32);
  const auto color = nerf::color_layers(m);
  s.layers.insert(s.layers.end(), color.begin(), color.end());
  s.points = 256 * 1024;
  auto t = mlp_byte_totals(s);
  CHECK(t.input_read == 16u * 1024 * 1024);
  CHECK(t.output_write == 1536u * 1024);
  CHECK(t.intermediate == 32u * 1024 * 1024);

  s.points = 1;
  t = mlp_byte_totals(s);
  CHECK(t.input_read == 64);
  CHECK(t.output_write == 6);

  s.points = 1000;
  const auto a = mlp_byte_totals(s);
  const auto ta = generate_mlp_trace(s);
  s.points = 2000;
  const auto b = mlp_byte_totals(s);
  const auto tb = generate_mlp_trace(s);
  CHECK(b.input_read == 2 * a.input_read);
  CHECK(b.output_write == 2 * a.output_write);
  CHECK(b.intermediate == 2 * a.intermediate);
  CHECK(b.weight_read == 2 * a.weight_read);
  CHECK(tb.total_bytes() == 2 * ta.total_bytes());
  for (const auto& r : tb.requests) CHECK(r.address / 1024 == (r.address + r.size - 1) / 1024);

  s.kernel = Kernel::MLP_b;
  s.points = 64;
  const auto bw = mlp_byte_totals(s);
  CHECK(bw.input_read == 64u * 3 * 2);
  CHECK(bw.output_write == 64u * 32 * 2);
  CHECK(bw.weight_grad_write == 9408u * 4);
  const auto tr = generate_mlp_trace(s);
  CHECK(tr.total_bytes() ==
        bw.input_read + bw.weight_read + bw.intermediate + bw.output_write + bw.weight_grad_write);
}

TEST_CASE("binary trace round trip and header errors") {
  std::vector<MemoryRequest> reqs{{0, RequestKind::Read, 0x123456789, 32, Kernel::HT, 5},
                                  {1, RequestKind::Write, 42, 4, Kernel::HT_b, 1u << 16}};
  auto bytes = encode_trace(reqs);
  CHECK(bytes.size() == 16 + 2 * 30);
  CHECK(decode_trace(bytes) == reqs);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_trace(bad), ParseError);
  bad = bytes;
  bad[8] = 9;
  CHECK_THROWS_AS(decode_trace(bad), ParseError);
  bad = bytes;
  bad.pop_back();
  CHECK_THROWS_AS(decode_trace(bad), ParseError);
  CHECK_THROWS_AS(decode_trace(std::span<const uint8_t>(bytes.data(), 7)), ParseError);
  CHECK(decode_trace(encode_trace({})).empty());
}
