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

#include "fgstyle/scene.hpp"

#include <algorithm>
#include <cmath>

namespace fgstyle {

double smoothstep01(double t) {
  const double s = std::clamp(t, 0.0, 1.0);
  return s * s * (3.0 - 2.0 * s);
}

double Primitive::sdf(const Eigen::Vector3d &x) const {
  const Eigen::Vector3d p = rotation.transpose() * (x - center);
  switch (shape) {
    case Shape::kSphere:
      return p.norm() - radius;
    case Shape::kBox: {
      const Eigen::Vector3d q = p.cwiseAbs() - half_extents;
      return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
    }
    case Shape::kTorus: {
      const double ring = std::hypot(p.x(), p.y()) - radius;
      return std::hypot(ring, p.z()) - minor_radius;
    }
  }
  return 0.0;
}

void SceneOracle::validate() const {
  require(channels >= 3, "scene oracle needs at least three feature channels");
  require(softness > 0.0, "smoothstep softness must be positive");
  for (const Primitive &p : primitives) {
    require(p.amplitude >= 0.0, "primitive density amplitude must be >= 0");
    require(p.radius > 0.0 && p.minor_radius > 0.0 &&
                (p.half_extents.array() > 0.0).all(),
            "primitive dimensions must be positive");
    require(p.offset.size() == 0 || p.offset.size() == channels,
            "primitive offset must have one entry per channel");
  }
}

double SceneOracle::density(const Eigen::Vector3d &x) const {
  double d = 0.0;
  for (const Primitive &p : primitives)
    d += p.amplitude * smoothstep01(-p.sdf(x) / softness);
  return d;
}

double SceneOracle::default_offset(int primitive, int channel) const {
  return 0.25 * std::cos(1.3 * channel + 2.1 * primitive);
}

Eigen::VectorXd SceneOracle::feature(const Eigen::Vector3d &x) const {
  Eigen::VectorXd f(channels);
  for (int j = 0; j < channels; ++j) {
    const double omega = 1.0 + 0.5 * ((j / 3) % 2);
    f[j] = std::sin(omega * x[j % 3] + 0.7 * j);
  }
  for (std::size_t p = 0; p < primitives.size(); ++p) {
    const double s = smoothstep01(-primitives[p].sdf(x) / softness);
    if (s == 0.0) continue;
    for (int j = 0; j < channels; ++j) {
      const double o = primitives[p].offset.size() ? primitives[p].offset[j]
                                                   : default_offset(int(p), j);
      f[j] += s * o;
    }
  }
  return f;
}

Eigen::Vector3d SceneOracle::rgb(const Eigen::Vector3d &x) const {
  const Eigen::VectorXd f = feature(x);
  return (0.5 + 0.5 * f.head<3>().array()).cwiseMax(0.0).cwiseMin(1.0);
}

SceneOracle sphere_scene(int channels, double radius, double amplitude) {
  SceneOracle s;
  s.channels = channels;
  Primitive p;
  p.radius = radius;
  p.amplitude = amplitude;
  s.primitives.push_back(p);
  return s;
}

ReferenceView reference_render(const SceneOracle &scene, const Camera &camera,
                               const SamplingSpec &spec,
                               const Eigen::Vector3d &background) {
  scene.validate();
  camera.validate();
  spec.validate();
  require(spec.samples >= kMinReferenceSamples,
          "reference rendering needs at least 256 samples per ray");

  ReferenceView view{FeatureMap(camera.width, camera.height, scene.channels),
                     RgbImage(camera.width, camera.height)};
  parallel_for(camera.height, [&](std::size_t row) {
    const int v = static_cast<int>(row);
    Eigen::VectorXd densities(spec.samples);
    for (int u = 0; u < camera.width; ++u) {
      const Ray ray = camera.ray(u, v);
      const DepthSamples ds = sample_depths(
          spec, pixel_seed(spec.seed, static_cast<std::uint32_t>(u),
                           static_cast<std::uint32_t>(v)));
      for (int i = 0; i < spec.samples; ++i)
        densities[i] = scene.density(ray.origin + ds.depths[i] * ray.direction);
      const RayWeights w = compute_weights(densities, ds.deltas);

      Eigen::VectorXd f = Eigen::VectorXd::Zero(scene.channels);
      Eigen::Vector3d c = Eigen::Vector3d::Zero();
      for (int i = 0; i < spec.samples; ++i) {
        if (w.weights[i] == 0.0) continue;
        const Eigen::Vector3d x = ray.origin + ds.depths[i] * ray.direction;
        f += w.weights[i] * scene.feature(x);
        c += w.weights[i] * scene.rgb(x);
      }
      const Eigen::Index p = view.features.index(u, v);
      view.features.data.row(p) = f.transpose();
      view.features.ray_weight[p] = w.ray_weight;
      view.rgb.pixels.row(p) = (c + (1.0 - w.ray_weight) * background).transpose();
    }
  });
  return view;
}

}  // namespace fgstyle
