#include "nerf_ref.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "error.hpp"
#include "rng.hpp"

namespace nmpnerf::nerf {

using grid::Point3;

void MlpConfig::validate() const {
  if (density_hidden < 1 || geo_features < 1 || view_dims != 16 || color_hidden < 1 ||
      color_hidden_layers < 1 || out_dims != 3)
    throw ConfigError(
        "mlp: widths must be positive, view_dims must be 16 and out_dims must be 3");
}

int MlpConfig::max_hidden() const { return std::max(density_hidden, color_hidden); }

std::vector<LayerDim> density_layers(const MlpConfig& cfg, int input_dim) {
  return {{input_dim, cfg.density_hidden}, {cfg.density_hidden, cfg.geo_features}};
}

std::vector<LayerDim> color_layers(const MlpConfig& cfg) {
  std::vector<LayerDim> out;
  int in = cfg.geo_features + cfg.view_dims;
  for (int i = 0; i < cfg.color_hidden_layers; ++i) {
    out.push_back({in, cfg.color_hidden});
    in = cfg.color_hidden;
  }
  out.push_back({in, cfg.out_dims});
  return out;
}

uint64_t mlp_weight_count(const MlpConfig& cfg, int input_dim) {
  uint64_t n = 0;
  for (auto d : density_layers(cfg, input_dim)) n += uint64_t(d.in) * uint64_t(d.out);
  for (auto d : color_layers(cfg)) n += uint64_t(d.in) * uint64_t(d.out);
  return n;
}

namespace {

std::vector<Layer> make_layers(const std::vector<LayerDim>& dims) {
  std::vector<Layer> layers;
  for (auto d : dims) layers.push_back({d.in, d.out, std::vector<double>(size_t(d.in) * d.out, 0.0)});
  return layers;
}

// Inputs and pre-activations of each layer, kept for the backward pass.
struct MlpTape {
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> pre;
};

std::vector<double> run_layers(const std::vector<Layer>& layers, std::vector<double> x,
                               MlpTape* tape) {
  for (size_t li = 0; li < layers.size(); ++li) {
    const Layer& L = layers[li];
    if (int(x.size()) != L.in)
      throw ConfigError("mlp layer " + std::to_string(li) + " expects " + std::to_string(L.in) +
                        " inputs, got " + std::to_string(x.size()));
    std::vector<double> y(size_t(L.out), 0.0);
    for (int o = 0; o < L.out; ++o) {
      double acc = 0.0;
      const double* row = &L.w[size_t(o) * L.in];
      for (int i = 0; i < L.in; ++i) acc += row[i] * x[size_t(i)];
      y[size_t(o)] = acc;
    }
    if (tape) {
      tape->inputs.push_back(x);
      tape->pre.push_back(y);
    }
    if (li + 1 < layers.size())
      for (double& v : y) v = std::max(v, 0.0);
    x = std::move(y);
  }
  return x;
}

// Accumulates weight gradients into grads and returns d(loss)/d(input).
std::vector<double> backprop_layers(const std::vector<Layer>& layers, const MlpTape& tape,
                                    std::vector<double> grad_out, std::vector<Layer>& grads) {
  for (size_t li = layers.size(); li-- > 0;) {
    const Layer& L = layers[li];
    if (li + 1 < layers.size())
      for (int o = 0; o < L.out; ++o)
        if (tape.pre[li][size_t(o)] <= 0.0) grad_out[size_t(o)] = 0.0;
    std::vector<double> grad_in(size_t(L.in), 0.0);
    const auto& x = tape.inputs[li];
    Layer& G = grads[li];
    for (int o = 0; o < L.out; ++o) {
      const double go = grad_out[size_t(o)];
      if (go == 0.0) continue;
      const double* row = &L.w[size_t(o) * L.in];
      double* grow = &G.w[size_t(o) * L.in];
      for (int i = 0; i < L.in; ++i) {
        grow[i] += go * x[size_t(i)];
        grad_in[size_t(i)] += go * row[i];
      }
    }
    grad_out = std::move(grad_in);
  }
  return grad_out;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Vec3 normalized(const Vec3& v) {
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  if (!(n > 0.0)) throw DomainError("zero-length direction");
  return {v[0] / n, v[1] / n, v[2] / n};
}

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

}  // namespace

MlpParams MlpParams::zeros(const MlpConfig& cfg, int input_dim) {
  cfg.validate();
  MlpParams p;
  p.density = make_layers(density_layers(cfg, input_dim));
  p.color = make_layers(color_layers(cfg));
  return p;
}

MlpParams MlpParams::random(const MlpConfig& cfg, int input_dim, uint64_t seed, double scale) {
  MlpParams p = zeros(cfg, input_dim);
  Rng rng(seed);
  auto fill = [&](std::vector<Layer>& layers) {
    for (auto& L : layers) {
      const double s = scale / std::sqrt(double(L.in));
      for (double& w : L.w) w = uniform_draw(rng, -s, s) * std::sqrt(3.0);
    }
  };
  fill(p.density);
  fill(p.color);
  return p;
}

size_t MlpParams::parameter_count() const {
  size_t n = 0;
  for (auto& L : density) n += L.w.size();
  for (auto& L : color) n += L.w.size();
  return n;
}

double& MlpParams::at(size_t flat) {
  for (auto* group : {&density, &color})
    for (auto& L : *group) {
      if (flat < L.w.size()) return L.w[flat];
      flat -= L.w.size();
    }
  throw DomainError("MlpParams::at index out of range");
}

double MlpParams::at(size_t flat) const { return const_cast<MlpParams*>(this)->at(flat); }

EmbeddingTable EmbeddingTable::zeros(const std::vector<grid::LevelConfig>& levels,
                                     int feature_dim) {
  EmbeddingTable t;
  t.feature_dim = feature_dim;
  for (auto& l : levels) t.levels.emplace_back(size_t(l.entries) * size_t(feature_dim), 0.0);
  return t;
}

EmbeddingTable EmbeddingTable::random(const std::vector<grid::LevelConfig>& levels,
                                      int feature_dim, uint64_t seed, double scale) {
  EmbeddingTable t = zeros(levels, feature_dim);
  Rng rng(seed);
  for (auto& lvl : t.levels)
    for (double& v : lvl) v = uniform_draw(rng, -scale, scale);
  return t;
}

Ray sample_segment(const Vec3& origin, const Vec3& dir, double t0, double t1, int n) {
  if (n < 1) throw DomainError("sample count must be >= 1");
  Ray r;
  r.origin = origin;
  r.dir = normalized(dir);
  if (n == 1) {
    r.t.push_back(0.5 * (t0 + t1));
    r.t_end = t1;
    return r;
  }
  const double step = (t1 - t0) / double(n - 1);
  for (int i = 0; i < n; ++i) r.t.push_back(t0 + step * i);
  r.t_end = t1 + step;
  return r;
}

Ray sample_ray(int px, int py, const Camera& camera, int n) {
  const Vec3 forward = normalized({camera.look_at[0] - camera.origin[0],
                                   camera.look_at[1] - camera.origin[1],
                                   camera.look_at[2] - camera.origin[2]});
  const Vec3 right = normalized(cross(forward, camera.up));
  const Vec3 up = cross(right, forward);
  const double half = std::tan(camera.fov_deg * std::numbers::pi / 360.0);
  const double aspect = double(camera.width) / double(camera.height);
  const double u = ((px + 0.5) / camera.width * 2.0 - 1.0) * half * aspect;
  const double v = (1.0 - (py + 0.5) / camera.height * 2.0) * half;
  Vec3 d;
  for (int i = 0; i < 3; ++i) d[i] = forward[i] + u * right[i] + v * up[i];
  return sample_segment(camera.origin, d, camera.t_near, camera.t_far, n);
}

bool intersect_unit_box(const Vec3& origin, const Vec3& dir, double& t_enter, double& t_exit) {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    if (dir[i] == 0.0) {
      if (origin[i] < 0.0 || origin[i] > 1.0) return false;
      continue;
    }
    double a = (0.0 - origin[i]) / dir[i];
    double b = (1.0 - origin[i]) / dir[i];
    if (a > b) std::swap(a, b);
    lo = std::max(lo, a);
    hi = std::min(hi, b);
  }
  if (lo > hi) return false;
  t_enter = lo;
  t_exit = hi;
  return true;
}

std::vector<Point3> ray_points(const Ray& ray) {
  std::vector<Point3> pts;
  constexpr double eps = 1e-12;
  for (double t : ray.t) {
    Point3 p;
    bool inside = true;
    for (int i = 0; i < 3; ++i) {
      p.x[i] = ray.origin[i] + t * ray.dir[i];
      if (p.x[i] < -eps || p.x[i] > 1.0 + eps) inside = false;
    }
    if (inside) pts.push_back(grid::clamp_unit(p));
  }
  return pts;
}

namespace {

struct LevelLookup {
  std::array<uint64_t, 8> idx{};
  std::array<double, 8> w{};
};

std::vector<double> ht_forward_impl(const Point3& p, const std::vector<grid::LevelConfig>& levels,
                                    grid::HashKind kind, const EmbeddingTable& table,
                                    const grid::HashPrimes& primes,
                                    std::vector<LevelLookup>* lookups) {
  const int F = table.feature_dim;
  std::vector<double> out(levels.size() * size_t(F), 0.0);
  if (lookups) lookups->resize(levels.size());
  for (size_t l = 0; l < levels.size(); ++l) {
    const auto s = grid::scale_point(p, levels[l]);
    const auto cube = grid::cube_vertices(s.base, s.frac);
    const auto& data = table.levels[l];
    for (int k = 0; k < 8; ++k) {
      const uint64_t idx = grid::entry_index(cube.vertices[size_t(k)], levels[l], kind, primes);
      const double w = cube.weights[size_t(k)];
      for (int f = 0; f < F; ++f) out[l * size_t(F) + size_t(f)] += w * data[idx * size_t(F) + size_t(f)];
      if (lookups) {
        (*lookups)[l].idx[size_t(k)] = idx;
        (*lookups)[l].w[size_t(k)] = w;
      }
    }
  }
  return out;
}

}  // namespace

std::vector<double> ht_forward(const Point3& p, const std::vector<grid::LevelConfig>& levels,
                               grid::HashKind kind, const EmbeddingTable& table,
                               const grid::HashPrimes& primes) {
  return ht_forward_impl(p, levels, kind, table, primes, nullptr);
}

std::array<double, 16> encode_direction(const Vec3& dir) {
  const Vec3 d = normalized(dir);
  const double x = d[0], y = d[1], z = d[2];
  const double xy = x * y, xz = x * z, yz = y * z, x2 = x * x, y2 = y * y, z2 = z * z;
  return {0.28209479177387814,
          -0.48860251190291987 * y,
          0.48860251190291987 * z,
          -0.48860251190291987 * x,
          1.0925484305920792 * xy,
          -1.0925484305920792 * yz,
          0.94617469575755997 * z2 - 0.31539156525251999,
          -1.0925484305920792 * xz,
          0.54627421529603959 * x2 - 0.54627421529603959 * y2,
          0.59004358992664352 * y * (-3.0 * x2 + y2),
          2.8906114426405538 * xy * z,
          0.45704579946446572 * y * (1.0 - 5.0 * z2),
          0.3731763325901154 * z * (5.0 * z2 - 3.0),
          0.45704579946446572 * x * (1.0 - 5.0 * z2),
          1.4453057213202769 * z * (x2 - y2),
          0.59004358992664352 * x * (-x2 + 3.0 * y2)};
}

namespace {

struct SampleTape {
  std::vector<LevelLookup> lookups;
  MlpTape density;
  MlpTape color;
  std::vector<double> geo;  // density MLP output
  double sigma = 0.0;
  Vec3 rgb{};
};

MlpOutput mlp_forward_impl(std::span<const double> embedding, std::span<const double> view,
                           const MlpParams& params, SampleTape* tape) {
  std::vector<double> geo = run_layers(params.density,
                                       std::vector<double>(embedding.begin(), embedding.end()),
                                       tape ? &tape->density : nullptr);
  if (geo.empty()) throw ConfigError("density MLP has no outputs");
  std::vector<double> color_in = geo;
  color_in.insert(color_in.end(), view.begin(), view.end());
  std::vector<double> raw = run_layers(params.color, std::move(color_in), tape ? &tape->color : nullptr);
  if (raw.size() != 3) throw ConfigError("color MLP must produce 3 outputs");
  MlpOutput out;
  out.sigma = std::exp(geo[0]);
  for (int c = 0; c < 3; ++c) out.rgb[size_t(c)] = sigmoid(raw[size_t(c)]);
  if (tape) {
    tape->geo = std::move(geo);
    tape->sigma = out.sigma;
    tape->rgb = out.rgb;
  }
  return out;
}

}  // namespace

MlpOutput mlp_forward(std::span<const double> embedding, std::span<const double> view_encoding,
                      const MlpParams& params) {
  return mlp_forward_impl(embedding, view_encoding, params, nullptr);
}

MlpBatchOutput mlp_forward_batch(std::span<const std::vector<double>> embeddings,
                                 std::span<const std::array<double, 16>> view_encodings,
                                 const MlpParams& params) {
  if (embeddings.size() != view_encodings.size())
    throw ConfigError("mlp_forward_batch: embedding and view batch sizes differ");
  MlpBatchOutput out;
  out.sigma.reserve(embeddings.size());
  out.rgb.reserve(embeddings.size());
  for (size_t i = 0; i < embeddings.size(); ++i) {
    auto r = mlp_forward(embeddings[i], view_encodings[i], params);
    out.sigma.push_back(r.sigma);
    out.rgb.push_back(r.rgb);
  }
  return out;
}

RenderResult volume_render(std::span<const RenderSample> samples, double t_end) {
  RenderResult r;
  r.weights.resize(samples.size(), 0.0);
  double optical_depth = 0.0;
  double trans = 1.0;
  for (size_t i = 0; i < samples.size(); ++i) {
    const double next = i + 1 < samples.size() ? samples[i + 1].t : t_end;
    optical_depth += samples[i].sigma * (next - samples[i].t);
    const double next_trans = std::exp(-optical_depth);
    // T_i * alpha_i, written as a telescoping difference.
    const double w = trans - next_trans;
    r.weights[i] = w;
    for (int c = 0; c < 3; ++c) r.color[size_t(c)] += w * samples[i].rgb[size_t(c)];
    trans = next_trans;
  }
  r.final_transmittance = trans;
  r.accumulated_alpha = 1.0 - trans;
  return r;
}

ModelState ModelState::create(const grid::HashGridConfig& grid, const MlpConfig& mlp,
                              uint64_t seed, double table_scale, double weight_scale) {
  grid.validate();
  mlp.validate();
  ModelState s;
  s.grid = grid;
  s.levels = grid.level_configs();
  s.mlp = mlp;
  s.table = EmbeddingTable::random(s.levels, grid.feature_dim, seed, table_scale);
  s.params = MlpParams::random(mlp, s.input_dim(), seed ^ 0x9E3779B97F4A7C15ull, weight_scale);
  return s;
}

namespace {

double forward_ray(const TrainingRay& tr, const ModelState& s, std::vector<SampleTape>* tapes,
                   std::vector<RenderSample>& samples, RenderResult& rr) {
  const auto view = encode_direction(tr.ray.dir);
  samples.clear();
  if (tapes) tapes->assign(tr.ray.t.size(), SampleTape{});
  for (size_t i = 0; i < tr.ray.t.size(); ++i) {
    Point3 p;
    for (int a = 0; a < 3; ++a) p.x[size_t(a)] = tr.ray.origin[size_t(a)] + tr.ray.t[i] * tr.ray.dir[size_t(a)];
    p = grid::clamp_unit(p);
    SampleTape* tape = tapes ? &(*tapes)[i] : nullptr;
    auto emb = ht_forward_impl(p, s.levels, s.grid.hash_kind, s.table, s.grid.primes,
                               tape ? &tape->lookups : nullptr);
    auto out = mlp_forward_impl(emb, view, s.params, tape);
    samples.push_back({out.sigma, out.rgb, tr.ray.t[i]});
  }
  rr = volume_render(samples, tr.ray.t_end);
  double loss = 0.0;
  for (int c = 0; c < 3; ++c) {
    const double e = rr.color[size_t(c)] - tr.target[size_t(c)];
    loss += e * e;
  }
  return loss;
}

}  // namespace

double loss_only(std::span<const TrainingRay> batch, const ModelState& state) {
  double loss = 0.0;
  std::vector<RenderSample> samples;
  RenderResult rr;
  for (const auto& tr : batch) loss += forward_ray(tr, state, nullptr, samples, rr);
  return loss;
}

LossResult loss_and_backward(std::span<const TrainingRay> batch, const ModelState& s) {
  LossResult res;
  res.grads.table = EmbeddingTable::zeros(s.levels, s.grid.feature_dim);
  res.grads.params = MlpParams::zeros(s.mlp, s.input_dim());
  const int F = s.grid.feature_dim;

  std::vector<SampleTape> tapes;
  std::vector<RenderSample> samples;
  RenderResult rr;
  for (const auto& tr : batch) {
    res.loss += forward_ray(tr, s, &tapes, samples, rr);
    res.predicted.push_back(rr.color);
    const size_t n = samples.size();
    if (n == 0) continue;

    Vec3 g;
    for (int c = 0; c < 3; ++c) g[size_t(c)] = 2.0 * (rr.color[size_t(c)] - tr.target[size_t(c)]);

    // suffix[k] = sum_{i>k} w_i (g . c_i)
    std::vector<double> gc(n), suffix(n, 0.0);
    for (size_t i = 0; i < n; ++i)
      gc[i] = g[0] * samples[i].rgb[0] + g[1] * samples[i].rgb[1] + g[2] * samples[i].rgb[2];
    for (size_t i = n - 1; i-- > 0;) suffix[i] = suffix[i + 1] + rr.weights[i + 1] * gc[i + 1];

    double optical_depth = 0.0;
    for (size_t k = 0; k < n; ++k) {
      const double next = k + 1 < n ? samples[k + 1].t : tr.ray.t_end;
      const double delta = next - samples[k].t;
      optical_depth += samples[k].sigma * delta;
      const double trans_after = std::exp(-optical_depth);
      const double d_sigma = delta * (trans_after * gc[k] - suffix[k]);

      SampleTape& tape = tapes[k];
      std::vector<double> d_raw(3);
      for (int c = 0; c < 3; ++c) {
        const double col = tape.rgb[size_t(c)];
        d_raw[size_t(c)] = rr.weights[k] * g[size_t(c)] * col * (1.0 - col);
      }
      std::vector<double> d_color_in = backprop_layers(s.params.color, tape.color, d_raw, res.grads.params.color);
      std::vector<double> d_geo(tape.geo.size(), 0.0);
      for (size_t j = 0; j < d_geo.size(); ++j) d_geo[j] = d_color_in[j];
      d_geo[0] += d_sigma * tape.sigma;
      std::vector<double> d_emb = backprop_layers(s.params.density, tape.density, d_geo, res.grads.params.density);

      for (size_t l = 0; l < tape.lookups.size(); ++l) {
        auto& gl = res.grads.table.levels[l];
        const auto& lk = tape.lookups[l];
        for (int v = 0; v < 8; ++v)
          for (int f = 0; f < F; ++f)
            gl[lk.idx[size_t(v)] * size_t(F) + size_t(f)] += lk.w[size_t(v)] * d_emb[l * size_t(F) + size_t(f)];
      }
    }
  }
  return res;
}

double train_step(std::span<const TrainingRay> batch, ModelState& state, double learning_rate) {
  LossResult r = loss_and_backward(batch, state);
  if (!std::isfinite(r.loss))
    throw InvariantViolation("train_step: non-finite loss " + std::to_string(r.loss));
  for (size_t l = 0; l < state.table.levels.size(); ++l) {
    auto& dst = state.table.levels[l];
    const auto& gl = r.grads.table.levels[l];
    for (size_t i = 0; i < dst.size(); ++i) {
      if (!std::isfinite(gl[i]))
        throw InvariantViolation("train_step: non-finite table gradient at level " + std::to_string(l));
      dst[i] -= learning_rate * gl[i];
    }
  }
  const size_t np = state.params.parameter_count();
  for (size_t i = 0; i < np; ++i) {
    const double gi = r.grads.params.at(i);
    if (!std::isfinite(gi))
      throw InvariantViolation("train_step: non-finite weight gradient at " + std::to_string(i));
    state.params.at(i) -= learning_rate * gi;
  }
  return r.loss;
}

std::vector<TrainingRay> toy_scene(int rays, int samples, uint64_t seed) {
  Rng rng(seed);
  std::vector<TrainingRay> out;
  for (int r = 0; r < rays; ++r) {
    TrainingRay tr;
    const Vec3 origin{uniform_draw(rng, 0.2, 0.8), uniform_draw(rng, 0.2, 0.8), -0.5};
    const Vec3 dir{uniform_draw(rng, -0.1, 0.1), uniform_draw(rng, -0.1, 0.1), 1.0};
    tr.ray = sample_segment(origin, dir, 0.6, 1.4, samples);
    // Left half reads reddish, right half bluish.
    tr.target = origin[0] < 0.5 ? Vec3{0.8, 0.3, 0.2} : Vec3{0.2, 0.3, 0.8};
    out.push_back(std::move(tr));
  }
  return out;
}

grid::HashGridConfig toy_grid() {
  grid::HashGridConfig g;
  g.levels = 4;
  g.table_size = 1u << 10;
  g.base_resolution = 4;
  g.max_resolution = 32;
  return g;
}

}  // namespace nmpnerf::nerf
