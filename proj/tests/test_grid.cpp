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
#include <limits>

#include <doctest.h>

#include "fgstyle/grid.hpp"
#include "test_util.hpp"

using namespace fgstyle;
using fgstyle::test::expect_error;
using fgstyle::test::random_field;

namespace {

GridGeometry odd_geometry() {
  GridGeometry g;
  g.resolution = {5, 7, 6};
  g.bbox_min = Eigen::Vector3d(-1.0, -0.5, 0.0);
  g.bbox_max = Eigen::Vector3d(1.0, 1.5, 2.5);
  return g;
}

// Independent reimplementation: per axis a linear line interpolant times a
// bilinear plane interpolant, written out with explicit corner weights.
struct Lerp {
  int i0;
  double t;
};

Lerp locate(const GridGeometry &g, int axis, double x) {
  const int n = g.resolution[axis];
  const double s = (x - g.bbox_min[axis]) / (g.bbox_max[axis] - g.bbox_min[axis]) * (n - 1);
  int i0 = static_cast<int>(std::floor(s));
  i0 = std::max(0, std::min(i0, n - 2));
  return {i0, s - i0};
}

Eigen::VectorXd oracle_components(const VMFactors &f, const Eigen::Vector3d &x) {
  const GridGeometry &g = f.geometry;
  Eigen::VectorXd out(3 * f.rank);
  const int pairs[3][2] = {{1, 2}, {0, 2}, {0, 1}};
  for (int a = 0; a < 3; ++a) {
    const int b = pairs[a][0], c = pairs[a][1];
    const Lerp la = locate(g, a, x[a]), lb = locate(g, b, x[b]), lc = locate(g, c, x[c]);
    const int nb = g.resolution[b];
    for (int r = 0; r < f.rank; ++r) {
      const double line =
          (1 - la.t) * f.lines[a](r, la.i0) + la.t * f.lines[a](r, la.i0 + 1);
      auto P = [&](int ib, int ic) { return f.planes[a](r, ib + nb * ic); };
      const double plane = (1 - lb.t) * (1 - lc.t) * P(lb.i0, lc.i0) +
                           lb.t * (1 - lc.t) * P(lb.i0 + 1, lc.i0) +
                           (1 - lb.t) * lc.t * P(lb.i0, lc.i0 + 1) +
                           lb.t * lc.t * P(lb.i0 + 1, lc.i0 + 1);
      out[a * f.rank + r] = line * plane;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("geometry validation") {
  GridGeometry g = odd_geometry();
  CHECK_NOTHROW(g.validate());
  g.resolution[1] = 1;
  expect_error(ErrorKind::kDomain, [&] { g.validate(); });
  g = odd_geometry();
  g.bbox_max[2] = g.bbox_min[2];
  expect_error(ErrorKind::kDomain, [&] { g.validate(); });
}

TEST_CASE("node positions span the bbox") {
  const GridGeometry g = odd_geometry();
  CHECK((g.node_position(0, 0, 0) - g.bbox_min).norm() == doctest::Approx(0.0));
  CHECK((g.node_position(4, 6, 5) - g.bbox_max).norm() == doctest::Approx(0.0));
  CHECK(g.node_count() == 5u * 7u * 6u);
}

TEST_CASE("stencil domain errors") {
  const GridGeometry g = odd_geometry();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  expect_error(ErrorKind::kDomain, [&] { make_stencil(g, {nan, 0.0, 1.0}); });
  expect_error(ErrorKind::kOutOfDomain, [&] { make_stencil(g, {1.01, 0.0, 1.0}); });
  expect_error(ErrorKind::kOutOfDomain, [&] { make_stencil(g, {0.0, -0.6, 1.0}); });
  CHECK_NOTHROW(make_stencil(g, g.bbox_max));
  CHECK_NOTHROW(make_stencil(g, g.bbox_min));
}

TEST_CASE("interpolated components match the explicit formula") {
  const RadianceField f = random_field(odd_geometry(), 3, 4, 11);
  Rng rng(12);
  for (int t = 0; t < 200; ++t) {
    Eigen::Vector3d x;
    for (int a = 0; a < 3; ++a)
      x[a] = rng.uniform(f.geometry().bbox_min[a], f.geometry().bbox_max[a]);
    const Eigen::VectorXd comps = oracle_components(f.feature.factors, x);
    const Eigen::VectorXd expected = f.feature.basis * comps;
    CHECK((sample_feature(f.feature, x) - expected).cwiseAbs().maxCoeff() < 1e-12);

    const double raw = oracle_components(f.density.factors, x).sum();
    CHECK(sample_raw_density(f.density, x) == doctest::Approx(raw).epsilon(1e-12));
    CHECK(sample_density(f.density, x) == doctest::Approx(std::log1p(std::exp(raw))));
  }
}

TEST_CASE("upper bbox faces interpolate to the last node") {
  const RadianceField f = random_field(odd_geometry(), 2, 3, 13);
  const DenseTensor dense = reconstruct_dense(f.feature);
  const Eigen::VectorXd v = sample_feature(f.feature, f.geometry().bbox_max);
  for (int c = 0; c < 3; ++c) CHECK(v[c] == doctest::Approx(dense.at(4, 6, 5, c)));
}

TEST_CASE("dense reconstruction matches a triple loop") {
  const RadianceField f = random_field(odd_geometry(), 8, 5, 14);
  const DenseTensor dense = reconstruct_dense(f.feature);
  const VMFactors &fac = f.feature.factors;
  const auto &n = fac.geometry.resolution;
  double worst = 0.0;
  for (int k = 0; k < n[2]; ++k)
    for (int j = 0; j < n[1]; ++j)
      for (int i = 0; i < n[0]; ++i) {
        const Eigen::VectorXd at_node =
            f.feature.basis * oracle_components(fac, fac.geometry.node_position(i, j, k));
        for (int c = 0; c < 5; ++c)
          worst = std::max(worst, std::abs(at_node[c] - dense.at(i, j, k, c)));
      }
  CHECK(worst <= 1e-6);

  const DenseTensor raw = reconstruct_dense(f.density);
  CHECK(raw.channels == 1);
  CHECK(raw.at(2, 3, 4, 0) ==
        doctest::Approx(oracle_components(f.density.factors,
                                          fac.geometry.node_position(2, 3, 4))
                            .sum()));
}

TEST_CASE("rank-one all-ones factors give the basis row sums") {
  GridGeometry g = odd_geometry();
  VMFeatureField f = VMFeatureField::zeros(g, 1, 2);
  for (int a = 0; a < 3; ++a) {
    f.factors.lines[a].setOnes();
    f.factors.planes[a].setOnes();
  }
  f.basis << 1.0, 2.0, 3.0, -1.0, 0.5, 0.25;
  const Eigen::VectorXd v = sample_feature(f, {0.3, 0.2, 1.1});
  CHECK(v[0] == doctest::Approx(6.0));
  CHECK(v[1] == doctest::Approx(-0.25));
}

TEST_CASE("parameter count is below the dense count at n = 64, C = 16") {
  GridGeometry g;
  g.resolution = {64, 64, 64};
  const VMFeatureField f = VMFeatureField::zeros(g, 8, 16);
  // 3 * 8 * 64 line entries, 3 * 8 * 64^2 plane entries, 16 x 24 basis.
  CHECK(f.parameter_count() == 1536u + 98304u + 384u);
  CHECK(f.parameter_count() < 64u * 64u * 64u * 16u);
}

TEST_CASE("dense reconstruction respects the allocation cap") {
  const RadianceField f = random_field(odd_geometry(), 1, 4, 15);
  expect_error(ErrorKind::kResource, [&] { reconstruct_dense(f.feature, 100); });
}

TEST_CASE("softplus and sigmoid") {
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)));
  CHECK(softplus(800.0) == doctest::Approx(800.0));
  CHECK(softplus(-800.0) >= 0.0);
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(3.0) + sigmoid(-3.0) == doctest::Approx(1.0));
  CHECK(sigmoid(-800.0) >= 0.0);
}

TEST_CASE("factor validation catches shape errors") {
  RadianceField f = random_field(odd_geometry(), 2, 3, 16);
  CHECK_NOTHROW(f.validate());
  f.feature.factors.planes[1].resize(2, 3);
  expect_error(ErrorKind::kDomain, [&] { f.validate(); });
}
