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

#include "fgstyle/decoder.hpp"

#include <cmath>

namespace fgstyle {

DecoderParams DecoderParams::zeros(int channels) {
  require(channels >= 1, "decoder channel count must be positive");
  DecoderParams p;
  p.weight = Eigen::Matrix<double, 3, Eigen::Dynamic>::Zero(3, channels);
  return p;
}

void DecoderParams::validate() const {
  require(weight.cols() >= 1, "decoder weight is empty");
  require(weight.allFinite() && bias.allFinite() && background.allFinite(),
          "decoder parameters must be finite");
}

RgbImage decode(const FeatureMap &map, const DecoderParams &params) {
  params.validate();
  require(map.channels() == params.channels(),
          "feature channels do not match the decoder");
  require(map.ray_weight.size() == map.pixel_count(),
          "feature map is missing its ray-weight channel");
  RgbImage out(map.width, map.height);
  for (Eigen::Index p = 0; p < map.pixel_count(); ++p) {
    const Eigen::Vector3d rgb =
        (params.weight * map.data.row(p).transpose() + params.bias)
            .cwiseMax(0.0)
            .cwiseMin(1.0);
    const double empty = 1.0 - map.ray_weight[p];
    out.pixels.row(p) =
        (rgb + empty * params.background).cwiseMax(0.0).cwiseMin(1.0).transpose();
  }
  return out;
}

DecoderFit fit_decoder(std::span<const FeatureMap> maps,
                       std::span<const RgbImage> targets,
                       const Eigen::Vector3d &background, double ridge) {
  require(!maps.empty() && maps.size() == targets.size(),
          "decoder fitting needs one target image per feature map");
  const int channels = maps[0].channels();
  const int dim = channels + 1;

  // Normal equations over [f, 1].
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(dim, 3);
  std::size_t used = 0;
  Eigen::VectorXd row(dim);
  for (std::size_t m = 0; m < maps.size(); ++m) {
    const FeatureMap &map = maps[m];
    const RgbImage &target = targets[m];
    require(map.channels() == channels, "feature maps must share channel count");
    require(target.width == map.width && target.height == map.height,
            "target image size must match its feature map");
    for (Eigen::Index p = 0; p < map.pixel_count(); ++p) {
      if (!(map.ray_weight[p] > kForegroundThreshold)) continue;
      row.head(channels) = map.data.row(p).transpose();
      row[channels] = 1.0;
      const Eigen::Vector3d y = target.pixels.row(p).transpose() -
                                (1.0 - map.ray_weight[p]) * background;
      gram.selfadjointView<Eigen::Lower>().rankUpdate(row);
      rhs += row * y.transpose();
      ++used;
    }
  }
  require(used >= std::size_t(dim),
          "decoder fitting needs at least C + 1 foreground pixels");
  gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
  gram.diagonal().head(channels).array() += ridge;

  const Eigen::MatrixXd solution = gram.ldlt().solve(rhs);
  DecoderFit fit;
  fit.params.weight = solution.topRows(channels).transpose();
  fit.params.bias = solution.row(channels).transpose();
  fit.params.background = background;
  fit.pixels_used = used;

  double sq = 0.0;
  for (std::size_t m = 0; m < maps.size(); ++m) {
    const FeatureMap &map = maps[m];
    for (Eigen::Index p = 0; p < map.pixel_count(); ++p) {
      if (!(map.ray_weight[p] > kForegroundThreshold)) continue;
      const Eigen::Vector3d pred =
          fit.params.weight * map.data.row(p).transpose() + fit.params.bias;
      const Eigen::Vector3d y = targets[m].pixels.row(p).transpose() -
                                (1.0 - map.ray_weight[p]) * background;
      sq += (pred - y).squaredNorm();
    }
  }
  fit.residual_rms = std::sqrt(sq / (3.0 * used));
  return fit;
}

}  // namespace fgstyle
