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

#ifndef FGSTYLE_DECODER_HPP_
#define FGSTYLE_DECODER_HPP_

#include <span>

#include <Eigen/Dense>

#include "fgstyle/common.hpp"

namespace fgstyle {

/// Linear feature -> RGB readout with background compositing.
struct DecoderParams {
  Eigen::Matrix<double, 3, Eigen::Dynamic> weight;
  Eigen::Vector3d bias = Eigen::Vector3d::Zero();
  Eigen::Vector3d background = Eigen::Vector3d::Ones();

  static DecoderParams zeros(int channels);
  int channels() const { return static_cast<int>(weight.cols()); }
  void validate() const;
};

/// rgb = clamp(weight * f + bias, 0, 1); out = clamp(rgb + (1 - w_r) * bg, 0, 1).
RgbImage decode(const FeatureMap &map, const DecoderParams &params);

/// Pixels with ray weight above this take part in decoder fitting.
inline constexpr double kForegroundThreshold = 0.5;
/// Ridge added to the weight block of the normal equations.
inline constexpr double kDecoderRidge = 1e-8;

struct DecoderFit {
  DecoderParams params;
  double residual_rms = 0.0;
  std::size_t pixels_used = 0;
};

/// Least squares from foreground features to (target - (1 - w_r) * bg).
/// The bias is unregularized.
DecoderFit fit_decoder(std::span<const FeatureMap> maps,
                       std::span<const RgbImage> targets,
                       const Eigen::Vector3d &background = Eigen::Vector3d::Ones(),
                       double ridge = kDecoderRidge);

}  // namespace fgstyle

#endif  // FGSTYLE_DECODER_HPP_
