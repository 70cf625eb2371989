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

#ifndef FGSTYLE_RENDER_HPP_
#define FGSTYLE_RENDER_HPP_

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "fgstyle/common.hpp"
#include "fgstyle/grid.hpp"

namespace fgstyle {

struct Ray {
  Eigen::Vector3d origin;
  Eigen::Vector3d direction;  // unit length
};

/// Pinhole camera, OpenCV convention: +x right, +y down, +z forward.
/// The ray of pixel (u, v) passes through (u + 0.5, v + 0.5).
struct Camera {
  Eigen::Matrix<double, 3, 4> pose = Eigen::Matrix<double, 3, 4>::Identity();
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
  int width = 1, height = 1;

  static Camera look_at(const Eigen::Vector3d &eye, const Eigen::Vector3d &target,
                        const Eigen::Vector3d &up, int width, int height,
                        double fov_y_deg);

  void validate() const;
  Ray ray(int u, int v) const;
};

/// `count` cameras evenly spaced in azimuth on a circle around `target`.
std::vector<Camera> orbit_cameras(int count, double radius, double elevation_deg,
                                  const Eigen::Vector3d &target, int width,
                                  int height, double fov_y_deg);

/// Samples sit one per bin of width (far - near) / N, at the bin centre or,
/// when stratified, uniformly inside the bin. Every delta is the bin width.
struct SamplingSpec {
  int samples = 64;
  double near = 2.0;
  double far = 6.0;
  bool stratified = false;
  std::uint64_t seed = 0;

  void validate() const;
};

struct DepthSamples {
  Eigen::VectorXd depths;
  Eigen::VectorXd deltas;
};

DepthSamples sample_depths(const SamplingSpec &spec, std::uint64_t stream_seed);

/// Samples along one ray. Points outside the grid bbox are masked out with
/// zero density and zero feature.
struct PointBatch {
  Eigen::MatrixX3d positions;
  Eigen::VectorXd depths;
  Eigen::VectorXd deltas;
  Eigen::VectorXd densities;
  Eigen::MatrixXd features;  // N x C
  Eigen::Array<bool, Eigen::Dynamic, 1> valid;

  Eigen::Index size() const { return depths.size(); }
};

struct RayWeights {
  Eigen::VectorXd weights;
  double ray_weight = 0.0;
};

/// w_i = exp(-sum_{j<i} sigma_j delta_j) * (1 - exp(-sigma_i delta_i)),
/// ray_weight = sum_i w_i.
RayWeights compute_weights(const Eigen::VectorXd &densities,
                           const Eigen::VectorXd &deltas);

PointBatch sample_ray(const Camera &camera, int u, int v, const SamplingSpec &spec,
                      const RadianceField &field);
PointBatch sample_ray(const Ray &ray, std::uint64_t stream_seed,
                      const SamplingSpec &spec, const RadianceField &field);

/// Maps a batch to per-point output features (N x C'). Must depend only on
/// the batch so that pixels stay independent.
using PointTransform = std::function<Eigen::MatrixXd(const PointBatch &)>;

/// Accumulates sum_i w_i * features.row(i) into `out`.
RayWeights integrate(const PointBatch &batch, const Eigen::MatrixXd &features,
                     Eigen::Ref<Eigen::RowVectorXd> out);

/// Renders every pixel of `camera` at full resolution. Pixels are
/// independent; the per-pixel seed is pixel_seed(spec.seed, u, v).
FeatureMap render_feature_map(const RadianceField &field, const Camera &camera,
                              const SamplingSpec &spec,
                              const PointTransform *transform = nullptr);

/// One pixel rendered in isolation; bit-identical to the same pixel of a
/// full render_feature_map call.
struct PixelSample {
  Eigen::RowVectorXd feature;
  double ray_weight = 0.0;
};

PixelSample render_pixel(const RadianceField &field, const Camera &camera, int u,
                         int v, const SamplingSpec &spec,
                         const PointTransform *transform = nullptr);

}  // namespace fgstyle

#endif  // FGSTYLE_RENDER_HPP_
