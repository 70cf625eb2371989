// Copyright 2026 The fgstyle Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FGSTYLE_TRAINER_HPP_
#define FGSTYLE_TRAINER_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fgstyle/decoder.hpp"
#include "fgstyle/grid.hpp"
#include "fgstyle/render.hpp"
#include "fgstyle/scene.hpp"
#include "fgstyle/style.hpp"

namespace fgstyle {

/// The losses are means over rays and channels, so gradients per entry are
/// small and the step sizes are correspondingly large. Density factors take
/// `density_lr_scale` times the feature step.
struct Stage1Config {
  double learning_rate = 30.0;
  int iterations = 2000;
  int rays_per_batch = 128;
  std::uint64_t seed = 0;
  double rgb_loss_weight = 1.0;
  double density_lr_scale = 10.0;
  double init_scale = 0.5;

  void validate() const;
};

struct LossReport {
  double feature_mse = 0.0;
  double rgb_mse = 0.0;
  double total = 0.0;
  int iteration = 0;
};

/// feature_mse + weight * rgb_mse, each a mean over all elements.
LossReport grid_loss(const Eigen::MatrixXd &pred_features,
                     const Eigen::MatrixXd &gt_features,
                     const Eigen::MatrixXd &pred_rgb, const Eigen::MatrixXd &gt_rgb,
                     double weight);

/// Gradient with the same layout as a RadianceField's parameters.
struct FieldGradient {
  std::array<Eigen::MatrixXd, 3> feature_lines;
  std::array<Eigen::MatrixXd, 3> feature_planes;
  Eigen::MatrixXd basis;
  std::array<Eigen::MatrixXd, 3> density_lines;
  std::array<Eigen::MatrixXd, 3> density_planes;

  static FieldGradient zeros_like(const RadianceField &field);
  FieldGradient &operator+=(const FieldGradient &other);
  double squared_norm() const;
};

/// field -= step * gradient, with `density_step` for the density factors.
/// Bumps the field revision.
void apply_gradient_step(RadianceField &field, const FieldGradient &gradient,
                         double step, double density_step);

/// Forward state of one ray, retained for the backward pass.
struct RayForward {
  std::uint64_t revision = 0;
  std::vector<PointStencil> stencils;      // valid samples only
  std::vector<int> sample_index;           // valid sample -> ray position
  Eigen::MatrixXd feature_components;      // 3R x valid
  Eigen::MatrixXd features;                // C x valid
  Eigen::VectorXd raw_density;             // valid
  Eigen::VectorXd optical;                 // sigma * delta, valid
  Eigen::VectorXd deltas;                  // valid
  Eigen::VectorXd weights;                 // valid
  Eigen::VectorXd transmittance_after;     // exp(-sum_{j<=i} a_j), valid
  Eigen::VectorXd feature;                 // integrated, C
  double ray_weight = 0.0;
};

RayForward forward_ray(const RadianceField &field, const Ray &ray,
                       const DepthSamples &samples);

/// Accumulates into `gradient` the parameter gradient of a loss whose
/// derivatives with respect to the ray's integrated feature and ray weight
/// are given. Throws kContract if the field changed since forward_ray.
void render_backward(const RadianceField &field, const RayForward &forward,
                     const Eigen::VectorXd &grad_feature, double grad_ray_weight,
                     FieldGradient &gradient);

/// Unclamped linear RGB readout used inside the training loss:
/// rgb = weight * f + bias + (1 - w_r) * background.
struct LinearReadout {
  Eigen::Matrix<double, 3, Eigen::Dynamic> weight;
  Eigen::Vector3d bias = Eigen::Vector3d::Zero();
  Eigen::Vector3d background = Eigen::Vector3d::Ones();

  static LinearReadout from(const DecoderParams &params);
};

/// Ground-truth maps for one camera.
struct TrainingView {
  Camera camera;
  FeatureMap features;
  RgbImage rgb;
  Eigen::Vector3d background = Eigen::Vector3d::Ones();
};

struct RaySample {
  int view = 0;
  int u = 0;
  int v = 0;
};

struct BatchResult {
  LossReport loss;
  FieldGradient gradient;
};

/// Loss over a ray set and, if requested, its exact gradient. Rays use the
/// non-stratified layout of `spec` so the objective is deterministic.
BatchResult evaluate_batch(const RadianceField &field,
                           std::span<const TrainingView> views,
                           std::span<const RaySample> rays, const SamplingSpec &spec,
                           const LinearReadout &readout, double rgb_weight,
                           bool with_gradient);

struct FieldLayout {
  GridGeometry geometry;
  int rank = 8;
  int channels = 16;
};

/// Seeded initialization: feature factors and basis
/// uniform(-init_scale, init_scale); density lines 1 + uniform(-0.1, 0.1),
/// density planes -1/(3R) + uniform(-0.01, 0.01), so the raw density starts
/// near -1 (thin fog).
RadianceField initialize_field(const FieldLayout &layout, std::uint64_t seed,
                               double init_scale = 0.5);

struct Stage1Result {
  RadianceField field;
  DecoderFit decoder;
  std::vector<LossReport> curve;  // per-iteration batch loss, before the step
  LossReport initial;             // full-view loss of the initialization
  LossReport final;               // full-view loss after training
};

/// Full-image loss of `field` against every view.
LossReport evaluate_views(const RadianceField &field,
                          std::span<const TrainingView> views,
                          const SamplingSpec &spec, const LinearReadout &readout,
                          double rgb_weight);

std::vector<TrainingView> make_training_views(const SceneOracle &scene,
                                              std::span<const Camera> cameras,
                                              int reference_samples,
                                              const SamplingSpec &spec,
                                              const Eigen::Vector3d &background);

inline constexpr double kDivergenceLimit = 1e6;

/// Plain gradient descent on random ray batches, then a least-squares
/// decoder fit on the trained field's renderings.
Stage1Result fit_stage1(std::span<const TrainingView> views, const FieldLayout &layout,
                        const SamplingSpec &spec, const Stage1Config &config);

struct StylizationMetrics {
  double content = 0.0;
  double style = 0.0;
  double total = 0.0;
};

/// content = MSE(stylized, content_map); style = (mean - mu)^2 +
/// (std - sigma)^2 over all stylized entries; total = content + lambda * style.
StylizationMetrics stylization_metrics(const FeatureMap &stylized,
                                       const FeatureMap &content,
                                       const StyleStats &stats, double lambda);

}  // namespace fgstyle

#endif  // FGSTYLE_TRAINER_HPP_
