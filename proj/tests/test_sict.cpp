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

#include <cmath>

#include <doctest.h>

#include "fgstyle/sict.hpp"
#include "fgstyle/verify.hpp"
#include "test_util.hpp"

using namespace fgstyle;
using fgstyle::test::expect_error;
using fgstyle::test::random_field;

namespace {

VolumeAdaptiveIN random_state(int channels, std::uint64_t seed) {
  Rng rng(seed);
  VolumeAdaptiveIN s = VolumeAdaptiveIN::identity(channels);
  s.running_mean = rng.matrix(channels, 1, -1.0, 1.0);
  s.running_var = rng.matrix(channels, 1, 0.2, 2.0);
  return s;
}

AttentionParams random_attention(int channels, int reduced, std::uint64_t seed) {
  Rng rng(seed);
  return {rng.matrix(reduced, channels, -1.0, 1.0), rng.matrix(reduced, channels, -1.0, 1.0),
          rng.matrix(reduced, channels, -1.0, 1.0)};
}

}  // namespace

TEST_CASE("eval normalization uses the running estimates per point") {
  const VolumeAdaptiveIN s = random_state(3, 1);
  Eigen::MatrixXd x(2, 3);
  x << 0.5, -1.0, 2.0, 0.0, 0.3, -0.7;
  const Eigen::MatrixXd y = normalize(x, s);
  for (int i = 0; i < 2; ++i)
    for (int c = 0; c < 3; ++c)
      CHECK(y(i, c) == doctest::Approx((x(i, c) - s.running_mean[c]) /
                                       std::sqrt(s.running_var[c] + s.epsilon)));
  // Row 0 on its own gives the same row.
  CHECK((normalize(x.topRows(1), s).array() == y.topRows(1).array()).all());
}

TEST_CASE("train normalization: biased batch moments and momentum update") {
  VolumeAdaptiveIN s = VolumeAdaptiveIN::identity(2);
  s.mode = NormMode::kTrain;
  s.momentum = 0.25;
  Eigen::MatrixXd x(4, 2);
  x << 1, 10, 2, 10, 3, 10, 6, 10;
  // Column 0: mean 3, biased variance (4 + 1 + 0 + 9) / 4 = 3.5. Column 1 constant.
  const Eigen::MatrixXd y = normalize(x, s);
  CHECK(s.running_mean[0] == doctest::Approx(0.75 * 0.0 + 0.25 * 3.0));
  CHECK(s.running_var[0] == doctest::Approx(0.75 * 1.0 + 0.25 * 3.5));
  CHECK(s.running_mean[1] == doctest::Approx(2.5));
  CHECK(s.running_var[1] == doctest::Approx(0.75));
  CHECK(y(3, 0) == doctest::Approx(3.0 / std::sqrt(3.5 + 1e-5)));
  CHECK(y.col(1).isZero(0.0));
}

TEST_CASE("vanilla normalization does not update and depends on the batch") {
  VolumeAdaptiveIN s = random_state(2, 2);
  s.mode = NormMode::kVanilla;
  const VolumeAdaptiveIN before = s;
  Eigen::MatrixXd x(3, 2);
  x << 1, 2, 3, 4, 8, -1;
  const Eigen::MatrixXd y = normalize(x, s);
  CHECK(s.running_mean == before.running_mean);
  CHECK(s.running_var == before.running_var);
  const Eigen::MatrixXd y2 = normalize(x.topRows(2), s);
  CHECK(std::abs(y2(0, 0) - y(0, 0)) > 1e-3);
}

TEST_CASE("train mode through a const state is a contract error") {
  VolumeAdaptiveIN s = VolumeAdaptiveIN::identity(2);
  s.mode = NormMode::kTrain;
  const VolumeAdaptiveIN &cs = s;
  expect_error(ErrorKind::kContract, [&] { normalize(Eigen::MatrixXd::Ones(1, 2), cs); });
  expect_error(ErrorKind::kDomain, [&] { sict_transform(s, AttentionParams::identity(2, 2)); });
}

TEST_CASE("state validation") {
  VolumeAdaptiveIN s = VolumeAdaptiveIN::identity(3);
  CHECK_NOTHROW(s.validate());
  s.running_var[1] = -0.1;
  expect_error(ErrorKind::kDomain, [&] { s.validate(); });
  s = VolumeAdaptiveIN::identity(3);
  s.momentum = 1.0;
  expect_error(ErrorKind::kDomain, [&] { s.validate(); });
  expect_error(ErrorKind::kDomain,
               [&] { normalize(Eigen::MatrixXd::Ones(1, 4), VolumeAdaptiveIN::identity(3)); });
  expect_error(ErrorKind::kDomain, [] { AttentionParams::identity(3, 4); });
}

TEST_CASE("attention rows are a softmax of scaled outer products") {
  const AttentionParams p = random_attention(5, 3, 3);
  Rng rng(4);
  const Eigen::VectorXd x = rng.matrix(5, 1, -2.0, 2.0);
  const Eigen::MatrixXd a = attention_matrix(x, p);
  const Eigen::VectorXd q = p.query * x, k = p.key * x;
  for (int r = 0; r < 3; ++r) {
    CHECK(a.row(r).sum() == doctest::Approx(1.0));
    double z = 0.0;
    for (int c = 0; c < 3; ++c) z += std::exp(q[r] * k[c] / std::sqrt(3.0));
    for (int c = 0; c < 3; ++c)
      CHECK(a(r, c) == doctest::Approx(std::exp(q[r] * k[c] / std::sqrt(3.0)) / z));
  }
  const Eigen::MatrixXd out = channel_attention(x.transpose(), p);
  CHECK((out.row(0).transpose() - a * (p.value * x)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("attention with large scores stays finite") {
  const AttentionParams p = AttentionParams::identity(2, 2);
  Eigen::MatrixXd x(1, 2);
  x << 400.0, -400.0;
  const Eigen::MatrixXd out = channel_attention(x, p);
  CHECK(out.allFinite());
}

TEST_CASE("masked points map to zero in apply_sict") {
  const RadianceField f = random_field(GridGeometry{}, 2, 4, 5);
  Ray ray{{0.0, 0.0, -3.0}, {0.0, 0.0, 1.0}};
  SamplingSpec s;
  s.samples = 6;
  s.near = 0.0;
  s.far = 6.0;
  const PointBatch b = sample_ray(ray, 0, s, f);
  const Eigen::MatrixXd out = apply_sict(b, random_state(4, 6), random_attention(4, 2, 7));
  CHECK(out.cols() == 2);
  for (int i = 0; i < 6; ++i)
    if (!b.valid[i]) CHECK(out.row(i).isZero(0.0));
  CHECK(!out.row(2).isZero(0.0));
}

TEST_CASE("calibration estimates volume moments") {
  // Feature = basis * components; a constant field has zero variance.
  GridGeometry g;
  g.resolution = {4, 4, 4};
  VMFeatureField f = VMFeatureField::zeros(g, 1, 2);
  for (int a = 0; a < 3; ++a) {
    f.factors.lines[a].setOnes();
    f.factors.planes[a].setOnes();
  }
  f.basis << 1, 1, 1, 0, 0, 2;
  // 16 batches of 256: the running estimates move 1 - 0.9^16 of the way
  // from (mean 0, var 1) to the batch moments (3, 2) and (0, 0).
  CalibrationSpec spec;
  spec.points = 4096;
  const VolumeAdaptiveIN s = calibrate(f, spec);
  const double left = std::pow(0.9, 16);
  CHECK(s.mode == NormMode::kEval);
  CHECK(s.running_mean[0] == doctest::Approx(3.0 * (1.0 - left)));
  CHECK(s.running_mean[1] == doctest::Approx(2.0 * (1.0 - left)));
  CHECK(s.running_var[0] == doctest::Approx(left));

  const VolumeAdaptiveIN again = calibrate(f, spec);
  CHECK(again.running_mean == s.running_mean);

  // The default 2^16 points leave 0.9^256 of the prior.
  const VolumeAdaptiveIN full = calibrate(f, CalibrationSpec{});
  CHECK(full.running_mean[0] == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(full.running_var.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("eval transform is sampling invariant and vanilla is not") {
  const VolumeAdaptiveIN eval = random_state(6, 8);
  const AttentionParams p = random_attention(6, 4, 9);
  const PropertyReport r = check_sampling_invariance(eval, p, 8, 6, 10);
  CHECK(r.pass);
  CHECK(r.max_error == 0.0);

  VolumeAdaptiveIN vanilla = eval;
  vanilla.mode = NormMode::kVanilla;
  const PropertyReport rv = check_sampling_invariance(vanilla, p, 8, 6, 10);
  CHECK(rv.pass);
  CHECK(rv.max_error > 1e-3);
}
