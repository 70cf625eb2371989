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

#include "fgstyle/grid.hpp"

#include <algorithm>
#include <sstream>

namespace fgstyle {

void GridGeometry::validate() const {
  for (int a = 0; a < 3; ++a) {
    require(resolution[a] >= 2, "grid resolution must be >= 2 on every axis");
    require(std::isfinite(bbox_min[a]) && std::isfinite(bbox_max[a]),
            "grid bbox must be finite");
    require(bbox_min[a] < bbox_max[a], "grid bbox_min must be < bbox_max");
  }
}

bool GridGeometry::contains(const Eigen::Vector3d &x) const {
  return (x.array() >= bbox_min.array()).all() &&
         (x.array() <= bbox_max.array()).all();
}

Eigen::Vector3d GridGeometry::node_position(int i, int j, int k) const {
  const Eigen::Vector3d idx(i, j, k);
  const Eigen::Vector3d steps(resolution[0] - 1, resolution[1] - 1,
                              resolution[2] - 1);
  return bbox_min.array() +
         (bbox_max - bbox_min).array() * idx.array() / steps.array();
}

std::size_t GridGeometry::node_count() const {
  return std::size_t(resolution[0]) * resolution[1] * resolution[2];
}

VMFactors VMFactors::zeros(const GridGeometry &geometry, int rank) {
  geometry.validate();
  require(rank >= 1, "rank must be positive");
  VMFactors f;
  f.geometry = geometry;
  f.rank = rank;
  for (int a = 0; a < 3; ++a) {
    const auto [b, c] = kPlaneAxes[a];
    f.lines[a] = Eigen::MatrixXd::Zero(rank, geometry.resolution[a]);
    f.planes[a] = Eigen::MatrixXd::Zero(
        rank, Eigen::Index(geometry.resolution[b]) * geometry.resolution[c]);
  }
  return f;
}

std::size_t VMFactors::parameter_count() const {
  std::size_t n = 0;
  for (int a = 0; a < 3; ++a) n += lines[a].size() + planes[a].size();
  return n;
}

void VMFactors::validate() const {
  geometry.validate();
  require(rank >= 1, "rank must be positive");
  for (int a = 0; a < 3; ++a) {
    const auto [b, c] = kPlaneAxes[a];
    require(lines[a].rows() == rank && lines[a].cols() == geometry.resolution[a],
            "line factor shape does not match geometry");
    require(planes[a].rows() == rank &&
                planes[a].cols() ==
                    Eigen::Index(geometry.resolution[b]) * geometry.resolution[c],
            "plane factor shape does not match geometry");
  }
}

VMFeatureField VMFeatureField::zeros(const GridGeometry &geometry, int rank,
                                     int channels) {
  require(channels >= 1, "channel count must be positive");
  VMFeatureField f;
  f.factors = VMFactors::zeros(geometry, rank);
  f.basis = Eigen::MatrixXd::Zero(channels, 3 * rank);
  return f;
}

std::size_t VMFeatureField::parameter_count() const {
  return factors.parameter_count() + basis.size();
}

void VMFeatureField::validate() const {
  factors.validate();
  require(basis.rows() >= 1 && basis.cols() == factors.components(),
          "basis matrix must be C x 3R");
}

VMDensityField VMDensityField::zeros(const GridGeometry &geometry, int rank) {
  return VMDensityField{VMFactors::zeros(geometry, rank)};
}

void RadianceField::validate() const {
  feature.validate();
  density.factors.validate();
  const GridGeometry &g = geometry();
  const GridGeometry &d = density.factors.geometry;
  require(g.resolution == d.resolution && g.bbox_min == d.bbox_min &&
              g.bbox_max == d.bbox_max,
          "density and feature grids must share geometry");
}

PointStencil make_stencil(const GridGeometry &geometry, const Eigen::Vector3d &x) {
  if (!x.allFinite()) throw_error(ErrorKind::kDomain, "non-finite query point");
  if (!geometry.contains(x)) {
    std::ostringstream msg;
    msg << "query point (" << x.x() << ", " << x.y() << ", " << x.z()
        << ") outside grid bbox";
    throw_error(ErrorKind::kOutOfDomain, msg.str());
  }

  std::array<int, 3> base{};
  std::array<double, 3> frac{};
  for (int a = 0; a < 3; ++a) {
    const int n = geometry.resolution[a];
    const double g = (x[a] - geometry.bbox_min[a]) /
                     (geometry.bbox_max[a] - geometry.bbox_min[a]) * (n - 1);
    const int i0 = std::clamp(static_cast<int>(std::floor(g)), 0, n - 2);
    base[a] = i0;
    frac[a] = g - i0;
  }

  PointStencil s;
  for (int a = 0; a < 3; ++a) {
    const auto [b, c] = kPlaneAxes[a];
    AxisStencil &as = s[a];
    as.line_index = {base[a], base[a] + 1};
    as.line_weight = {1.0 - frac[a], frac[a]};
    const int nb = geometry.resolution[b];
    const int b0 = base[b], c0 = base[c];
    const double tb = frac[b], tc = frac[c];
    as.plane_index = {b0 + nb * c0, b0 + 1 + nb * c0, b0 + nb * (c0 + 1),
                      b0 + 1 + nb * (c0 + 1)};
    as.plane_weight = {(1.0 - tb) * (1.0 - tc), tb * (1.0 - tc),
                       (1.0 - tb) * tc, tb * tc};
  }
  return s;
}

Eigen::VectorXd component_values(const VMFactors &factors,
                                 const PointStencil &stencil) {
  const int R = factors.rank;
  Eigen::VectorXd out(3 * R);
  for (int a = 0; a < 3; ++a) {
    const AxisStencil &s = stencil[a];
    const Eigen::MatrixXd &line = factors.lines[a];
    const Eigen::MatrixXd &plane = factors.planes[a];
    for (int r = 0; r < R; ++r) {
      const double l = s.line_weight[0] * line(r, s.line_index[0]) +
                       s.line_weight[1] * line(r, s.line_index[1]);
      double p = 0.0;
      for (int k = 0; k < 4; ++k) p += s.plane_weight[k] * plane(r, s.plane_index[k]);
      out[a * R + r] = l * p;
    }
  }
  return out;
}

Eigen::VectorXd sample_feature(const VMFeatureField &field,
                               const Eigen::Vector3d &x) {
  const PointStencil s = make_stencil(field.factors.geometry, x);
  return field.basis * component_values(field.factors, s);
}

double sample_raw_density(const VMDensityField &field, const Eigen::Vector3d &x) {
  const PointStencil s = make_stencil(field.factors.geometry, x);
  return component_values(field.factors, s).sum();
}

double sample_density(const VMDensityField &field, const Eigen::Vector3d &x) {
  return softplus(sample_raw_density(field, x));
}

namespace {

DenseTensor expand(const VMFactors &factors, const Eigen::MatrixXd *basis,
                   std::size_t cap) {
  factors.validate();
  const auto &res = factors.geometry.resolution;
  const int channels = basis ? static_cast<int>(basis->rows()) : 1;
  const std::size_t total = factors.geometry.node_count() * channels;
  if (total > cap) {
    std::ostringstream msg;
    msg << "dense reconstruction needs " << total << " values, cap is " << cap;
    throw_error(ErrorKind::kResource, msg.str());
  }

  DenseTensor out;
  out.resolution = res;
  out.channels = channels;
  out.values.assign(total, 0.0);

  const int R = factors.rank;
  Eigen::VectorXd comp(3 * R);
  for (int k = 0; k < res[2]; ++k)
    for (int j = 0; j < res[1]; ++j)
      for (int i = 0; i < res[0]; ++i) {
        const std::array<int, 3> idx{i, j, k};
        for (int a = 0; a < 3; ++a) {
          const auto [b, c] = kPlaneAxes[a];
          const int col = idx[b] + res[b] * idx[c];
          for (int r = 0; r < R; ++r)
            comp[a * R + r] = factors.lines[a](r, idx[a]) * factors.planes[a](r, col);
        }
        const std::size_t base = out.offset(i, j, k, 0);
        if (basis) {
          const Eigen::VectorXd f = *basis * comp;
          for (int ch = 0; ch < channels; ++ch) out.values[base + ch] = f[ch];
        } else {
          out.values[base] = comp.sum();
        }
      }
  return out;
}

}  // namespace

DenseTensor reconstruct_dense(const VMFeatureField &field, std::size_t cap) {
  field.validate();
  return expand(field.factors, &field.basis, cap);
}

DenseTensor reconstruct_dense(const VMDensityField &field, std::size_t cap) {
  return expand(field.factors, nullptr, cap);
}

}  // namespace fgstyle
