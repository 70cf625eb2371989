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

#include "fgstyle/sict.hpp"

#include <cmath>

namespace fgstyle {

VolumeAdaptiveIN VolumeAdaptiveIN::identity(int channels, double epsilon) {
  require(channels >= 1, "channel count must be positive");
  VolumeAdaptiveIN s;
  s.running_mean = Eigen::VectorXd::Zero(channels);
  s.running_var = Eigen::VectorXd::Ones(channels);
  s.epsilon = epsilon;
  return s;
}

void VolumeAdaptiveIN::validate() const {
  require(running_mean.size() >= 1 && running_mean.size() == running_var.size(),
          "running statistics must be non-empty and of equal length");
  require((running_var.array() >= 0.0).all(), "running variance must be >= 0");
  require(momentum > 0.0 && momentum < 1.0, "momentum must be in (0, 1)");
  require(epsilon >= 0.0, "epsilon must be >= 0");
}

namespace {

Eigen::MatrixXd standardize(const Eigen::MatrixXd &points, const Eigen::VectorXd &mean,
                            const Eigen::VectorXd &var, double epsilon) {
  Eigen::MatrixXd out(points.rows(), points.cols());
  for (Eigen::Index c = 0; c < points.cols(); ++c) {
    const double denom = std::sqrt(var[c] + epsilon);
    for (Eigen::Index i = 0; i < points.rows(); ++i)
      out(i, c) = (points(i, c) - mean[c]) / denom;
  }
  return out;
}

struct BatchMoments {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
};

BatchMoments batch_moments(const Eigen::MatrixXd &points) {
  const double m = static_cast<double>(points.rows());
  BatchMoments bm;
  bm.mean = points.colwise().sum().transpose() / m;
  bm.var = (points.rowwise() - bm.mean.transpose())
               .array()
               .square()
               .colwise()
               .sum()
               .transpose() /
           m;
  return bm;
}

void check_width(const Eigen::MatrixXd &points, const VolumeAdaptiveIN &state) {
  state.validate();
  require(points.cols() == state.channels(),
          "point features do not match normalization channel count");
}

}  // namespace

Eigen::MatrixXd normalize(const Eigen::MatrixXd &points, VolumeAdaptiveIN &state) {
  if (state.mode != NormMode::kTrain)
    return normalize(points, static_cast<const VolumeAdaptiveIN &>(state));
  check_width(points, state);
  require(points.rows() >= 1, "train-mode normalization needs at least one point");
  const BatchMoments bm = batch_moments(points);
  state.running_mean = (1.0 - state.momentum) * state.running_mean + state.momentum * bm.mean;
  state.running_var = (1.0 - state.momentum) * state.running_var + state.momentum * bm.var;
  return standardize(points, bm.mean, bm.var, state.epsilon);
}

Eigen::MatrixXd normalize(const Eigen::MatrixXd &points,
                          const VolumeAdaptiveIN &state) {
  check_width(points, state);
  switch (state.mode) {
    case NormMode::kEval:
      return standardize(points, state.running_mean, state.running_var, state.epsilon);
    case NormMode::kVanilla: {
      require(points.rows() >= 1, "vanilla normalization needs at least one point");
      const BatchMoments bm = batch_moments(points);
      return standardize(points, bm.mean, bm.var, state.epsilon);
    }
    case NormMode::kTrain:
      break;
  }
  throw_error(ErrorKind::kContract,
              "train-mode normalization requires mutable running statistics");
}

AttentionParams AttentionParams::identity(int channels, int reduced_channels) {
  require(channels >= 1 && reduced_channels >= 1 && reduced_channels <= channels,
          "attention needs 1 <= C' <= C");
  const Eigen::MatrixXd rows =
      Eigen::MatrixXd::Identity(channels, channels).topRows(reduced_channels);
  return AttentionParams{rows, rows, rows};
}

void AttentionParams::validate() const {
  require(query.rows() >= 1 && query.cols() >= 1, "attention projections are empty");
  require(key.rows() == query.rows() && key.cols() == query.cols() &&
              value.rows() == query.rows() && value.cols() == query.cols(),
          "attention projections must share shape C' x C");
}

Eigen::MatrixXd attention_matrix(const Eigen::VectorXd &normed,
                                 const AttentionParams &params) {
  const Eigen::VectorXd q = params.query * normed;
  const Eigen::VectorXd k = params.key * normed;
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.size()));
  Eigen::MatrixXd a = (q * k.transpose()) * scale;
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double peak = a.row(r).maxCoeff();
    double total = 0.0;
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      a(r, c) = std::exp(a(r, c) - peak);
      total += a(r, c);
    }
    a.row(r) /= total;
  }
  return a;
}

Eigen::MatrixXd channel_attention(const Eigen::MatrixXd &normed,
                                  const AttentionParams &params) {
  params.validate();
  require(normed.cols() == params.channels(),
          "normalized features do not match attention input channels");
  Eigen::MatrixXd out(normed.rows(), params.reduced_channels());
  for (Eigen::Index i = 0; i < normed.rows(); ++i) {
    const Eigen::VectorXd x = normed.row(i).transpose();
    const Eigen::VectorXd v = params.value * x;
    out.row(i) = (attention_matrix(x, params) * v).transpose();
  }
  return out;
}

Eigen::MatrixXd apply_sict(const PointBatch &batch, const VolumeAdaptiveIN &state,
                           const AttentionParams &params) {
  Eigen::MatrixXd out =
      channel_attention(normalize(batch.features, state), params);
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    if (!batch.valid[i]) out.row(i).setZero();
  return out;
}

VolumeAdaptiveIN calibrate(const VMFeatureField &field, const CalibrationSpec &spec,
                           double momentum, double epsilon) {
  field.validate();
  require(spec.points >= 1 && spec.batch_size >= 1,
          "calibration needs a positive point count and batch size");
  VolumeAdaptiveIN state = VolumeAdaptiveIN::identity(field.channels(), epsilon);
  state.momentum = momentum;
  state.mode = NormMode::kTrain;

  const GridGeometry &g = field.factors.geometry;
  Rng rng(spec.seed);
  Eigen::MatrixXd chunk;
  for (std::size_t start = 0; start < spec.points; start += spec.batch_size) {
    const std::size_t m = std::min(spec.batch_size, spec.points - start);
    chunk.resize(static_cast<Eigen::Index>(m), field.channels());
    for (std::size_t i = 0; i < m; ++i) {
      Eigen::Vector3d x;
      for (int a = 0; a < 3; ++a) x[a] = rng.uniform(g.bbox_min[a], g.bbox_max[a]);
      chunk.row(static_cast<Eigen::Index>(i)) = sample_feature(field, x).transpose();
    }
    normalize(chunk, state);
  }
  state.mode = NormMode::kEval;
  return state;
}

PointTransform sict_transform(const VolumeAdaptiveIN &state,
                              const AttentionParams &params) {
  require(state.mode != NormMode::kTrain,
          "rendering requires eval-mode normalization");
  return [state, params](const PointBatch &batch) {
    return apply_sict(batch, state, params);
  };
}

}  // namespace fgstyle
