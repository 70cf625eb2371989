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

// Sampling-invariant content transformation: per-point normalization with
// volume-wide running statistics followed by channel-wise self-attention.
// In eval mode the output for a point is a pure function of that point's
// feature vector.

#ifndef FGSTYLE_SICT_HPP_
#define FGSTYLE_SICT_HPP_

#include <cstdint>

#include <Eigen/Dense>

#include "fgstyle/grid.hpp"
#include "fgstyle/render.hpp"

namespace fgstyle {

enum class NormMode {
  kTrain,    // batch statistics, running estimates updated
  kEval,     // running estimates only, per point
  kVanilla,  // batch statistics without updates (diagnostic only)
};

struct VolumeAdaptiveIN {
  Eigen::VectorXd running_mean;
  Eigen::VectorXd running_var;
  double momentum = 0.1;
  double epsilon = 1e-5;
  NormMode mode = NormMode::kEval;

  /// mean 0, var 1, eval mode.
  static VolumeAdaptiveIN identity(int channels, double epsilon = 1e-5);

  int channels() const { return static_cast<int>(running_mean.size()); }
  void validate() const;
};

/// Train mode uses biased batch variance and updates
/// running <- (1 - momentum) * running + momentum * batch.
Eigen::MatrixXd normalize(const Eigen::MatrixXd &points, VolumeAdaptiveIN &state);
/// Eval or vanilla mode only; train mode is a contract error here.
Eigen::MatrixXd normalize(const Eigen::MatrixXd &points,
                          const VolumeAdaptiveIN &state);

struct AttentionParams {
  Eigen::MatrixXd query;  // C' x C
  Eigen::MatrixXd key;    // C' x C
  Eigen::MatrixXd value;  // C' x C

  /// First C' rows of the C x C identity for all three projections.
  static AttentionParams identity(int channels, int reduced_channels);

  int channels() const { return static_cast<int>(query.cols()); }
  int reduced_channels() const { return static_cast<int>(query.rows()); }
  void validate() const;
};

/// Softmax normalizes each row of the per-point C' x C' score matrix.
inline constexpr bool kSoftmaxOverRows = true;

/// Per point: q = Wq x, k = Wk x, v = Wv x,
/// A = row_softmax(q k^T / sqrt(C')), out = A v.
Eigen::MatrixXd channel_attention(const Eigen::MatrixXd &normed,
                                  const AttentionParams &params);

/// The C' x C' attention matrix of a single normalized point.
Eigen::MatrixXd attention_matrix(const Eigen::VectorXd &normed,
                                 const AttentionParams &params);

/// normalize -> channel_attention, with masked-out points mapped to zero.
Eigen::MatrixXd apply_sict(const PointBatch &batch, const VolumeAdaptiveIN &state,
                           const AttentionParams &params);

struct CalibrationSpec {
  std::size_t points = std::size_t(1) << 16;
  std::size_t batch_size = 256;
  std::uint64_t seed = 0;
};

/// Estimates running statistics by streaming seeded uniform points in the
/// bbox through train-mode normalization in fixed order. Returns the state
/// switched to eval mode.
VolumeAdaptiveIN calibrate(const VMFeatureField &field, const CalibrationSpec &spec,
                           double momentum = 0.1, double epsilon = 1e-5);

/// PointTransform wrapper around apply_sict for the renderer.
PointTransform sict_transform(const VolumeAdaptiveIN &state,
                              const AttentionParams &params);

}  // namespace fgstyle

#endif  // FGSTYLE_SICT_HPP_
