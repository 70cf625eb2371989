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

// Deferred style transformation. A rendered C'-channel feature map f with
// ray weight w_r becomes
//
//   out = conv * (T * f) * sigma + w_r * mu
//
// which equals integrating conv * (T * f_i) * sigma + mu over the ray
// samples with their weights w_i. The second form is kept as a reference
// pathway for verification.

#ifndef FGSTYLE_STYLE_HPP_
#define FGSTYLE_STYLE_HPP_

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fgstyle/common.hpp"

namespace fgstyle {

/// Style feature tensor: positions (row-major H_s x W_s) by C' channels.
struct StyleFeatures {
  int width = 0;
  int height = 0;
  Eigen::MatrixXd data;

  int channels() const { return static_cast<int>(data.cols()); }
};

template <typename Scalar>
struct BasicStyleStats {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Scalar mu = 0;
  Scalar sigma = 1;
  Matrix covariance;
  Matrix transform;  // principal square root of the clamped covariance

  int channels() const { return static_cast<int>(transform.rows()); }

  template <typename Other>
  BasicStyleStats<Other> cast() const {
    return {static_cast<Other>(mu), static_cast<Other>(sigma),
            covariance.template cast<Other>(), transform.template cast<Other>()};
  }
};

using StyleStats = BasicStyleStats<double>;

/// mu = sigma = global scalars (population convention); channel covariance
/// over positions; T = U diag(sqrt(max(lambda, 0))) U^T.
StyleStats compute_style_stats(const StyleFeatures &features);

/// T = I, sigma = 1, mu = 0, cov = I.
StyleStats identity_style(int channels);

/// Principal square root of a symmetric matrix with negative eigenvalues
/// clamped to zero.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd &symmetric);

template <typename Scalar>
struct BasicDstParams {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> conv;  // C x C'

  int channels() const { return static_cast<int>(conv.rows()); }
  int reduced_channels() const { return static_cast<int>(conv.cols()); }
};

using DstParams = BasicDstParams<double>;

/// Identity when C == C', otherwise ones on the main diagonal.
DstParams default_dst_params(int channels, int reduced_channels);

template <typename Scalar>
void check_dst_shapes(int map_channels, const BasicStyleStats<Scalar> &stats,
                      const BasicDstParams<Scalar> &params) {
  require(stats.transform.rows() == stats.transform.cols(),
          "style transform must be square");
  require(map_channels == stats.channels(),
          "feature channels do not match style transform");
  require(params.reduced_channels() == stats.channels(),
          "conv input channels do not match style transform");
}

/// Per pixel: conv * (T * f) * sigma + w_r * mu. Ray weights pass through.
template <typename Scalar>
BasicFeatureMap<Scalar> apply_dst(const BasicFeatureMap<Scalar> &map,
                                  const BasicStyleStats<Scalar> &stats,
                                  const BasicDstParams<Scalar> &params) {
  check_dst_shapes(map.channels(), stats, params);
  require(map.ray_weight.size() == map.pixel_count(),
          "feature map is missing its ray-weight channel");
  BasicFeatureMap<Scalar> out;
  out.width = map.width;
  out.height = map.height;
  out.ray_weight = map.ray_weight;
  out.data = (map.data * stats.transform.transpose()) * params.conv.transpose();
  out.data *= stats.sigma;
  for (Eigen::Index p = 0; p < out.data.rows(); ++p)
    out.data.row(p).array() += map.ray_weight[p] * stats.mu;
  return out;
}

/// sum_i w_i * (conv * (T * f_i) * sigma + mu) for one ray.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> apply_pointwise_style(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> &points,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> &weights,
    const BasicStyleStats<Scalar> &stats, const BasicDstParams<Scalar> &params) {
  check_dst_shapes(static_cast<int>(points.cols()), stats, params);
  require(weights.size() == points.rows(), "one weight per point required");
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  Vector out = Vector::Zero(params.channels());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    Vector styled = params.conv * (stats.transform * points.row(i).transpose());
    styled *= stats.sigma;
    styled.array() += stats.mu;
    out += weights[i] * styled;
  }
  return out;
}

/// Pixelwise convex combination; weights must sum to 1 within 1e-6.
FeatureMap interpolate_styles(std::span<const FeatureMap> maps,
                              std::span<const double> weights);

/// Pixelwise sum_k mask_k * map_k; masks must sum to 1 per pixel within
/// 1e-6. Ray weights are blended the same way.
FeatureMap composite_styles(std::span<const FeatureMap> maps,
                            std::span<const Eigen::VectorXd> masks);

/// Channels produced by extract_style_features, in order:
///   0  luminance, Gaussian sigma 1
///   1  d/dx of Gaussian, sigma 1
///   2  d/dy of Gaussian, sigma 1
///   3  difference of Gaussians, sigma 1 minus sigma 2
///   4  d/dx of Gaussian, sigma 2
///   5  d/dy of Gaussian, sigma 2
///   6  difference of Gaussians, sigma 2 minus sigma 4
///   7  diagonal derivative (dx + dy) / sqrt 2, sigma 1
///   8  anti-diagonal derivative (dx - dy) / sqrt 2, sigma 1
///   9  diagonal derivative, sigma 2
///   10 anti-diagonal derivative, sigma 2
///   11 red, Gaussian sigma 1
///   12 green, Gaussian sigma 1
///   13 blue, Gaussian sigma 1
/// Luminance is 0.299 R + 0.587 G + 0.114 B. Kernels are sampled Gaussians
/// with radius ceil(3 sigma), normalized to unit sum; derivative kernels are
/// the analytic derivative normalized so a unit ramp gives slope 1. Borders
/// clamp to edge. Output keeps every second row and column from (0, 0).
inline constexpr int kStyleBankSize = 14;
inline constexpr int kStyleBankMaxKernel = 2 * 12 + 1;

StyleFeatures extract_style_features(const RgbImage &image, int channels);

}  // namespace fgstyle

#endif  // FGSTYLE_STYLE_HPP_
