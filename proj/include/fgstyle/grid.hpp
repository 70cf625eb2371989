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

#ifndef FGSTYLE_GRID_HPP_
#define FGSTYLE_GRID_HPP_

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "fgstyle/common.hpp"

namespace fgstyle {

/// Axis-aligned voxel lattice. Node i along axis a sits at
/// bbox_min[a] + i * (bbox_max[a] - bbox_min[a]) / (resolution[a] - 1).
struct GridGeometry {
  std::array<int, 3> resolution{2, 2, 2};
  Eigen::Vector3d bbox_min = Eigen::Vector3d::Constant(-1.0);
  Eigen::Vector3d bbox_max = Eigen::Vector3d::Constant(1.0);

  void validate() const;
  bool contains(const Eigen::Vector3d &x) const;
  Eigen::Vector3d node_position(int i, int j, int k) const;
  std::size_t node_count() const;
};

/// The two axes spanning the plane factor paired with a line axis:
/// X -> (Y, Z), Y -> (X, Z), Z -> (X, Y).
constexpr std::array<std::array<int, 2>, 3> kPlaneAxes{{{1, 2}, {0, 2}, {0, 1}}};

/// One vector-matrix factor set of rank R. For each axis a, lines[a] is
/// R x n_a and planes[a] is R x (n_b * n_c) with column i_b + n_b * i_c.
/// Component (a, r) at a node is lines[a](r, i_a) * planes[a](r, i_b, i_c).
struct VMFactors {
  GridGeometry geometry;
  int rank = 0;
  std::array<Eigen::MatrixXd, 3> lines;
  std::array<Eigen::MatrixXd, 3> planes;

  static VMFactors zeros(const GridGeometry &geometry, int rank);

  /// Number of stacked components, 3R.
  int components() const { return 3 * rank; }
  std::size_t parameter_count() const;
  void validate() const;
};

/// C-channel appearance volume: F(x) = basis * components(x).
struct VMFeatureField {
  VMFactors factors;
  Eigen::MatrixXd basis;  // C x 3R

  static VMFeatureField zeros(const GridGeometry &geometry, int rank,
                              int channels);

  int channels() const { return static_cast<int>(basis.rows()); }
  std::size_t parameter_count() const;
  void validate() const;
};

/// Scalar density volume: sigma(x) = softplus(sum of all 3R components).
struct VMDensityField {
  VMFactors factors;

  static VMDensityField zeros(const GridGeometry &geometry, int rank);
  std::size_t parameter_count() const { return factors.parameter_count(); }
};

/// Density plus features over a shared geometry, with a revision counter
/// bumped by every mutation so cached forward passes can detect staleness.
struct RadianceField {
  VMDensityField density;
  VMFeatureField feature;
  std::uint64_t revision = 0;

  const GridGeometry &geometry() const { return feature.factors.geometry; }
  int channels() const { return feature.channels(); }
  void validate() const;
};

/// Interpolation footprint of a point on one axis term: two line taps and
/// four bilinear plane taps.
struct AxisStencil {
  std::array<int, 2> line_index;
  std::array<double, 2> line_weight;
  std::array<int, 4> plane_index;
  std::array<double, 4> plane_weight;
};

using PointStencil = std::array<AxisStencil, 3>;

/// Throws kDomain for non-finite x and kOutOfDomain outside the bbox.
PointStencil make_stencil(const GridGeometry &geometry, const Eigen::Vector3d &x);

/// The 3R interpolated components at a stencil, ordered (axis, rank).
Eigen::VectorXd component_values(const VMFactors &factors,
                                 const PointStencil &stencil);

inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Eigen::VectorXd sample_feature(const VMFeatureField &field,
                               const Eigen::Vector3d &x);
double sample_raw_density(const VMDensityField &field, const Eigen::Vector3d &x);
double sample_density(const VMDensityField &field, const Eigen::Vector3d &x);

/// Dense n_x * n_y * n_z * C tensor, x fastest then y, z, channel last
/// within a node.
struct DenseTensor {
  std::array<int, 3> resolution{0, 0, 0};
  int channels = 0;
  std::vector<double> values;

  std::size_t offset(int i, int j, int k, int c) const {
    return ((std::size_t(k) * resolution[1] + j) * resolution[0] + i) *
               channels + c;
  }
  double at(int i, int j, int k, int c) const { return values[offset(i, j, k, c)]; }
};

inline constexpr std::size_t kDefaultDenseCap = std::size_t(1) << 26;

DenseTensor reconstruct_dense(const VMFeatureField &field,
                              std::size_t cap = kDefaultDenseCap);
/// Raw (pre-softplus) density values.
DenseTensor reconstruct_dense(const VMDensityField &field,
                              std::size_t cap = kDefaultDenseCap);

}  // namespace fgstyle

#endif  // FGSTYLE_GRID_HPP_
