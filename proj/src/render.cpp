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

#include "fgstyle/render.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace fgstyle {

Camera Camera::look_at(const Eigen::Vector3d &eye, const Eigen::Vector3d &target,
                       const Eigen::Vector3d &up, int width, int height,
                       double fov_y_deg) {
  require(width >= 1 && height >= 1, "camera size must be positive");
  require(fov_y_deg > 0.0 && fov_y_deg < 180.0, "camera fov must be in (0, 180)");
  const Eigen::Vector3d forward = (target - eye).normalized();
  Eigen::Vector3d right = forward.cross(up);
  require(right.norm() > 1e-9, "camera up vector is parallel to view direction");
  right.normalize();
  const Eigen::Vector3d down = forward.cross(right);

  Camera cam;
  cam.pose.col(0) = right;
  cam.pose.col(1) = down;
  cam.pose.col(2) = forward;
  cam.pose.col(3) = eye;
  cam.width = width;
  cam.height = height;
  const double f =
      0.5 * height / std::tan(0.5 * fov_y_deg * std::numbers::pi / 180.0);
  cam.fx = f;
  cam.fy = f;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  return cam;
}

void Camera::validate() const {
  require(width >= 1 && height >= 1, "camera size must be positive");
  require(fx > 0.0 && fy > 0.0, "camera focal lengths must be positive");
  require(pose.allFinite(), "camera pose must be finite");
  const Eigen::Matrix3d rot = pose.leftCols<3>();
  require((rot.transpose() * rot - Eigen::Matrix3d::Identity())
                  .cwiseAbs()
                  .maxCoeff() <= 1e-5,
          "camera rotation block must be orthonormal");
}

Ray Camera::ray(int u, int v) const {
  const Eigen::Vector3d local((u + 0.5 - cx) / fx, (v + 0.5 - cy) / fy, 1.0);
  return Ray{pose.col(3), (pose.leftCols<3>() * local).normalized()};
}

std::vector<Camera> orbit_cameras(int count, double radius, double elevation_deg,
                                  const Eigen::Vector3d &target, int width,
                                  int height, double fov_y_deg) {
  require(count >= 1, "camera count must be positive");
  require(radius > 0.0, "orbit radius must be positive");
  const double elevation = elevation_deg * std::numbers::pi / 180.0;
  std::vector<Camera> cams;
  cams.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double azimuth = 2.0 * std::numbers::pi * i / count;
    const Eigen::Vector3d offset(radius * std::cos(elevation) * std::cos(azimuth),
                                 radius * std::cos(elevation) * std::sin(azimuth),
                                 radius * std::sin(elevation));
    cams.push_back(Camera::look_at(target + offset, target, Eigen::Vector3d::UnitZ(),
                                   width, height, fov_y_deg));
  }
  return cams;
}

void SamplingSpec::validate() const {
  require(samples >= 1, "samples per ray must be >= 1");
  require(std::isfinite(near) && std::isfinite(far), "near/far must be finite");
  require(near >= 0.0, "near must be >= 0");
  require(near < far, "near must be < far");
}

DepthSamples sample_depths(const SamplingSpec &spec, std::uint64_t stream_seed) {
  spec.validate();
  const int n = spec.samples;
  const double bin = (spec.far - spec.near) / n;
  DepthSamples out{Eigen::VectorXd(n), Eigen::VectorXd::Constant(n, bin)};
  if (spec.stratified) {
    Rng rng(stream_seed);
    for (int i = 0; i < n; ++i) out.depths[i] = spec.near + (i + rng.uniform()) * bin;
  } else {
    for (int i = 0; i < n; ++i) out.depths[i] = spec.near + (i + 0.5) * bin;
  }
  return out;
}

RayWeights compute_weights(const Eigen::VectorXd &densities,
                           const Eigen::VectorXd &deltas) {
  require(densities.size() == deltas.size(),
          "densities and deltas must have equal length");
  RayWeights out{Eigen::VectorXd(densities.size()), 0.0};
  double optical_depth = 0.0;
  for (Eigen::Index i = 0; i < densities.size(); ++i) {
    const double sigma = densities[i];
    const double delta = deltas[i];
    if (!(sigma >= 0.0) || !(delta >= 0.0))
      throw_error(ErrorKind::kDomain, "densities and deltas must be >= 0");
    const double a = sigma * delta;
    const double w = std::exp(-optical_depth) * -std::expm1(-a);
    out.weights[i] = w;
    out.ray_weight += w;
    optical_depth += a;
  }
  return out;
}

PointBatch sample_ray(const Ray &ray, std::uint64_t stream_seed,
                      const SamplingSpec &spec, const RadianceField &field) {
  const DepthSamples ds = sample_depths(spec, stream_seed);
  const int n = spec.samples;
  const int channels = field.channels();
  const GridGeometry &geometry = field.geometry();

  PointBatch b;
  b.depths = ds.depths;
  b.deltas = ds.deltas;
  b.positions.resize(n, 3);
  b.densities = Eigen::VectorXd::Zero(n);
  b.features = Eigen::MatrixXd::Zero(n, channels);
  b.valid.resize(n);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d x = ray.origin + b.depths[i] * ray.direction;
    b.positions.row(i) = x.transpose();
    b.valid[i] = x.allFinite() && geometry.contains(x);
    if (!b.valid[i]) continue;
    const PointStencil s = make_stencil(geometry, x);
    b.densities[i] = softplus(component_values(field.density.factors, s).sum());
    b.features.row(i) =
        (field.feature.basis * component_values(field.feature.factors, s)).transpose();
  }
  return b;
}

PointBatch sample_ray(const Camera &camera, int u, int v, const SamplingSpec &spec,
                      const RadianceField &field) {
  if (u < 0 || v < 0 || u >= camera.width || v >= camera.height) {
    std::ostringstream msg;
    msg << "pixel (" << u << ", " << v << ") outside " << camera.width << "x"
        << camera.height << " image";
    throw_error(ErrorKind::kDomain, msg.str());
  }
  return sample_ray(camera.ray(u, v),
                    pixel_seed(spec.seed, static_cast<std::uint32_t>(u),
                               static_cast<std::uint32_t>(v)),
                    spec, field);
}

RayWeights integrate(const PointBatch &batch, const Eigen::MatrixXd &features,
                     Eigen::Ref<Eigen::RowVectorXd> out) {
  require(features.rows() == batch.size(), "feature rows must match batch size");
  require(out.size() == features.cols(), "output width must match feature channels");
  RayWeights w = compute_weights(batch.densities, batch.deltas);
  out.setZero();
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    if (w.weights[i] == 0.0) continue;
    out += w.weights[i] * features.row(i);
  }
  return w;
}

PixelSample render_pixel(const RadianceField &field, const Camera &camera, int u,
                         int v, const SamplingSpec &spec,
                         const PointTransform *transform) {
  const PointBatch batch = sample_ray(camera, u, v, spec, field);
  PixelSample px;
  if (transform && *transform) {
    const Eigen::MatrixXd transformed = (*transform)(batch);
    px.feature.resize(transformed.cols());
    px.ray_weight = integrate(batch, transformed, px.feature).ray_weight;
  } else {
    px.feature.resize(batch.features.cols());
    px.ray_weight = integrate(batch, batch.features, px.feature).ray_weight;
  }
  return px;
}

FeatureMap render_feature_map(const RadianceField &field, const Camera &camera,
                              const SamplingSpec &spec,
                              const PointTransform *transform) {
  camera.validate();
  spec.validate();
  field.validate();
  const std::size_t count = std::size_t(camera.width) * camera.height;
  std::vector<PixelSample> pixels(count);
  parallel_for(camera.height, [&](std::size_t v) {
    for (int u = 0; u < camera.width; ++u)
      pixels[v * camera.width + u] =
          render_pixel(field, camera, u, static_cast<int>(v), spec, transform);
  });

  FeatureMap map(camera.width, camera.height,
                 static_cast<int>(pixels.front().feature.size()));
  for (std::size_t p = 0; p < count; ++p) {
    map.data.row(p) = pixels[p].feature;
    map.ray_weight[p] = pixels[p].ray_weight;
  }
  return map;
}

}  // namespace fgstyle
