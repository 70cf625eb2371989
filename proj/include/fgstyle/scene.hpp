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

// Procedural scenes with closed-form density, feature and colour fields.
//
//   density(x)  = sum_p amplitude_p * smoothstep(-sdf_p(x) / softness)
//   smoothstep(t) = s^2 (3 - 2 s),  s = clamp(t, 0, 1)
//   feature_j(x) = sin(omega_j * x[j mod 3] + phi_j) + sum_p s_p(x) * o_pj
//       omega_j = 1 + 0.5 * (floor(j / 3) mod 2),  phi_j = 0.7 * j
//       s_p(x)  = smoothstep(-sdf_p(x) / softness)
//       o_pj    = primitive offset, default 0.25 * cos(1.3 j + 2.1 p)
//   rgb_k(x)    = clamp(0.5 + 0.5 * feature_k(x), 0, 1),  k = 0, 1, 2
//
// Shapes are defined in a local frame (x_local = R^T (x - center)):
// sphere of `radius`, box of `half_extents`, torus around local z with
// major `radius` and `minor_radius`.

#ifndef FGSTYLE_SCENE_HPP_
#define FGSTYLE_SCENE_HPP_

#include <vector>

#include <Eigen/Dense>

#include "fgstyle/common.hpp"
#include "fgstyle/render.hpp"

namespace fgstyle {

enum class Shape { kSphere, kBox, kTorus };

struct Primitive {
  Shape shape = Shape::kSphere;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  double radius = 1.0;
  double minor_radius = 0.25;
  Eigen::Vector3d half_extents = Eigen::Vector3d::Constant(0.5);
  double amplitude = 20.0;
  Eigen::VectorXd offset;  // empty selects the default offsets

  double sdf(const Eigen::Vector3d &x) const;
};

struct SceneOracle {
  std::vector<Primitive> primitives;
  double softness = 0.05;
  int channels = 16;

  void validate() const;
  double density(const Eigen::Vector3d &x) const;
  Eigen::VectorXd feature(const Eigen::Vector3d &x) const;
  Eigen::Vector3d rgb(const Eigen::Vector3d &x) const;
  double default_offset(int primitive, int channel) const;
};

double smoothstep01(double t);

/// A single sphere of the given radius and amplitude at the origin.
SceneOracle sphere_scene(int channels, double radius = 1.0, double amplitude = 20.0);

inline constexpr int kMinReferenceSamples = 256;

struct ReferenceView {
  FeatureMap features;
  RgbImage rgb;
};

/// Same quadrature as the grid renderer but on the analytic fields, with
/// no bbox culling. RGB is composited over `background`.
ReferenceView reference_render(const SceneOracle &scene, const Camera &camera,
                               const SamplingSpec &spec,
                               const Eigen::Vector3d &background = Eigen::Vector3d::Ones());

}  // namespace fgstyle

#endif  // FGSTYLE_SCENE_HPP_
