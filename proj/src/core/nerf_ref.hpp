#pragma once

// Functional reference of the hash-grid NeRF bottleneck: hash-table forward
// (lookup, trilinear interpolation, concatenation), the density and color
// MLPs, volume rendering, squared-error loss and the full backward pass.
// All arithmetic is double precision.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "hashgrid.hpp"

namespace nmpnerf::nerf {

using Vec3 = std::array<double, 3>;

struct MlpConfig {
  int density_hidden = 64;
  int geo_features = 16;  // density MLP output width; output 0 feeds sigma
  int view_dims = 16;
  int color_hidden = 64;
  int color_hidden_layers = 2;
  int out_dims = 3;

  void validate() const;
  int max_hidden() const;
};

struct LayerDim {
  int in = 0;
  int out = 0;
};

std::vector<LayerDim> density_layers(const MlpConfig& cfg, int input_dim);
std::vector<LayerDim> color_layers(const MlpConfig& cfg);
uint64_t mlp_weight_count(const MlpConfig& cfg, int input_dim);

// Row-major out x in weights, no bias. ReLU follows every layer but the last.
struct Layer {
  int in = 0;
  int out = 0;
  std::vector<double> w;
};

struct MlpParams {
  std::vector<Layer> density;
  std::vector<Layer> color;

  static MlpParams zeros(const MlpConfig& cfg, int input_dim);
  static MlpParams random(const MlpConfig& cfg, int input_dim, uint64_t seed, double scale);
  size_t parameter_count() const;
  // Flat views in (density..., color...) layer order, for optimizers and tests.
  double& at(size_t flat);
  double at(size_t flat) const;
};

struct EmbeddingTable {
  int feature_dim = 0;
  std::vector<std::vector<double>> levels;  // entries x F per level

  static EmbeddingTable zeros(const std::vector<grid::LevelConfig>& levels, int feature_dim);
  static EmbeddingTable random(const std::vector<grid::LevelConfig>& levels, int feature_dim,
                               uint64_t seed, double scale);
};

struct Camera {
  Vec3 origin{0.5, 0.5, -1.0};
  Vec3 look_at{0.5, 0.5, 0.5};
  Vec3 up{0.0, 1.0, 0.0};
  double fov_deg = 40.0;
  int width = 64;
  int height = 64;
  double t_near = 1.0;
  double t_far = 2.0;
};

struct Ray {
  Vec3 origin{};
  Vec3 dir{};  // unit length
  std::vector<double> t;
  double t_end = 0.0;  // closes the last sample interval
};

// Uniform samples over [t0, t1]: endpoints included for n >= 2, the midpoint for n == 1.
Ray sample_segment(const Vec3& origin, const Vec3& dir, double t0, double t1, int n);
Ray sample_ray(int px, int py, const Camera& camera, int n);

// Sample positions inside the closed scene box [0,1]^3 (clamped to [0,1) for
// lookup). A ray that misses the box yields an empty list.
std::vector<grid::Point3> ray_points(const Ray& ray);

// Entry-parameter interval [t_enter, t_exit] of the unit box; false on a miss.
bool intersect_unit_box(const Vec3& origin, const Vec3& dir, double& t_enter, double& t_exit);

std::vector<double> ht_forward(const grid::Point3& p, const std::vector<grid::LevelConfig>& levels,
                               grid::HashKind kind, const EmbeddingTable& table,
                               const grid::HashPrimes& primes = {});

// Fixed 16-dim real spherical-harmonics basis (degree 0..3) of a unit direction.
std::array<double, 16> encode_direction(const Vec3& dir);

struct MlpOutput {
  double sigma = 0.0;
  Vec3 rgb{};
};

MlpOutput mlp_forward(std::span<const double> embedding, std::span<const double> view_encoding,
                      const MlpParams& params);

struct MlpBatchOutput {
  std::vector<double> sigma;
  std::vector<Vec3> rgb;
};

MlpBatchOutput mlp_forward_batch(std::span<const std::vector<double>> embeddings,
                                 std::span<const std::array<double, 16>> view_encodings,
                                 const MlpParams& params);

struct RenderSample {
  double sigma = 0.0;
  Vec3 rgb{};
  double t = 0.0;
};

struct RenderResult {
  Vec3 color{};
  double accumulated_alpha = 0.0;
  double final_transmittance = 1.0;  // transmittance after the last sample
  std::vector<double> weights;
};

// delta_i = t_{i+1} - t_i with the last delta closed by t_end.
RenderResult volume_render(std::span<const RenderSample> samples, double t_end);

struct TrainingRay {
  Ray ray;
  Vec3 target{};
};

struct ModelState {
  grid::HashGridConfig grid;
  std::vector<grid::LevelConfig> levels;
  MlpConfig mlp;
  EmbeddingTable table;
  MlpParams params;

  static ModelState create(const grid::HashGridConfig& grid, const MlpConfig& mlp, uint64_t seed,
                           double table_scale = 1e-1, double weight_scale = 0.3);
  int input_dim() const { return grid.levels * grid.feature_dim; }
};

struct Gradients {
  EmbeddingTable table;
  MlpParams params;
};

struct LossResult {
  double loss = 0.0;
  Gradients grads;
  std::vector<Vec3> predicted;
};

double loss_only(std::span<const TrainingRay> batch, const ModelState& state);
LossResult loss_and_backward(std::span<const TrainingRay> batch, const ModelState& state);

// Plain gradient descent. Returns the loss evaluated before the update and
// throws InvariantViolation on a non-finite loss or gradient.
double train_step(std::span<const TrainingRay> batch, ModelState& state, double learning_rate);

// Four rays through a small two-blob scene with fixed targets; deterministic.
std::vector<TrainingRay> toy_scene(int rays, int samples, uint64_t seed);

// Four levels, T = 2^10, resolutions 4..32: small enough for dense gradients.
grid::HashGridConfig toy_grid();

}  // namespace nmpnerf::nerf
