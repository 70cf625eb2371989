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
#include <vector>

#include <doctest.h>

#include "fgstyle/trainer.hpp"
#include "fgstyle/verify.hpp"
#include "test_util.hpp"

using namespace fgstyle;
using fgstyle::test::expect_error;
using fgstyle::test::random_field;

namespace {

struct Tiny {
  FieldLayout layout;
  SamplingSpec spec;
  std::vector<TrainingView> views;
};

Tiny tiny_setup() {
  Tiny t;
  t.layout.geometry.resolution = {8, 8, 8};
  t.layout.geometry.bbox_min = Eigen::Vector3d::Constant(-1.5);
  t.layout.geometry.bbox_max = Eigen::Vector3d::Constant(1.5);
  t.layout.rank = 2;
  t.layout.channels = 4;
  t.spec.samples = 24;
  t.spec.near = 2.5;
  t.spec.far = 5.5;
  const auto cams = orbit_cameras(2, 4.0, 20.0, Eigen::Vector3d::Zero(), 8, 8, 40.0);
  t.views = make_training_views(sphere_scene(4), cams, 256, t.spec, Eigen::Vector3d::Ones());
  return t;
}

LinearReadout random_readout(int channels, std::uint64_t seed) {
  Rng rng(seed);
  LinearReadout r;
  r.weight = rng.matrix(3, channels, -0.5, 0.5);
  r.bias = rng.matrix(3, 1, 0.0, 0.5);
  return r;
}

}  // namespace

TEST_CASE("grid loss is a sum of two means") {
  Eigen::MatrixXd pf(2, 2), gf(2, 2), pr(1, 3), gr(1, 3);
  pf << 1, 2, 3, 4;
  gf << 1, 0, 3, 2;  // squared errors 0 4 0 4 -> mean 2
  pr << 0.5, 0.5, 0.5;
  gr << 0.5, 0.5, 1.1;  // mean 0.12
  const LossReport r = grid_loss(pf, gf, pr, gr, 0.5);
  CHECK(r.feature_mse == doctest::Approx(2.0));
  CHECK(r.rgb_mse == doctest::Approx(0.12));
  CHECK(r.total == doctest::Approx(2.06));
  expect_error(ErrorKind::kDomain, [&] { grid_loss(pf, gf.leftCols(1), pr, gr, 1.0); });
}

TEST_CASE("config validation") {
  Stage1Config c;
  CHECK_NOTHROW(c.validate());
  c.learning_rate = 0.0;
  expect_error(ErrorKind::kDomain, [&] { c.validate(); });
  c = Stage1Config{};
  c.rays_per_batch = 0;
  expect_error(ErrorKind::kDomain, [&] { c.validate(); });
  c = Stage1Config{};
  c.density_lr_scale = -1.0;
  expect_error(ErrorKind::kDomain, [&] { c.validate(); });
}

TEST_CASE("initialization layout") {
  FieldLayout l;
  l.geometry.resolution = {4, 5, 6};
  l.rank = 3;
  l.channels = 5;
  const RadianceField a = initialize_field(l, 7), b = initialize_field(l, 7), c = initialize_field(l, 8);
  CHECK(a.feature.basis == b.feature.basis);
  CHECK(a.feature.basis != c.feature.basis);
  CHECK(a.feature.basis.cwiseAbs().maxCoeff() <= 0.5);
  CHECK(initialize_field(l, 7, 0.1).feature.basis.cwiseAbs().maxCoeff() <= 0.1);
  // Raw density near -1: lines near 1, planes near -1/(3R), 3R components.
  const double raw = sample_raw_density(a.density, {0.1, 0.2, -0.3});
  CHECK(raw == doctest::Approx(-1.0).epsilon(0.25));
  expect_error(ErrorKind::kDomain, [&] { initialize_field(l, 7, 0.0); });
}

TEST_CASE("forward pass agrees with the renderer") {
  const RadianceField f = random_field(GridGeometry{}, 2, 3, 31, -0.7, 0.7);
  const Camera cam = Camera::look_at({0, -3, 0.2}, Eigen::Vector3d::Zero(), {0, 0, 1}, 4, 4, 50);
  SamplingSpec s;
  s.samples = 32;
  s.near = 1.5;
  s.far = 4.5;
  const DepthSamples d = sample_depths(s, 0);
  for (int v = 0; v < 4; ++v)
    for (int u = 0; u < 4; ++u) {
      const RayForward fwd = forward_ray(f, cam.ray(u, v), d);
      const PixelSample px = render_pixel(f, cam, u, v, s);
      CHECK((fwd.feature - px.feature.transpose()).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(fwd.ray_weight == doctest::Approx(px.ray_weight).epsilon(1e-12));
    }
}

TEST_CASE("single-sample weight derivative at a half-opaque sample") {
  // One valid sample with sigma * delta = ln 2: w = 1/2 and
  // dw/draw = exp(-ln 2) * delta * sigmoid(raw).
  GridGeometry g;
  g.resolution = {2, 2, 2};
  RadianceField f;
  f.feature = VMFeatureField::zeros(g, 1, 1);
  f.density = VMDensityField::zeros(g, 1);
  const double raw = std::log(std::exp(std::log(2.0)) - 1.0);  // softplus(raw) = ln 2
  f.density.factors.lines[0].setOnes();
  f.density.factors.planes[0].setConstant(raw);
  Ray ray{{0.0, 0.0, -2.0}, {0.0, 0.0, 1.0}};
  DepthSamples d{Eigen::VectorXd::Constant(1, 2.0), Eigen::VectorXd::Ones(1)};
  const RayForward fwd = forward_ray(f, ray, d);
  REQUIRE(fwd.weights.size() == 1);
  CHECK(fwd.weights[0] == doctest::Approx(0.5));

  FieldGradient grad = FieldGradient::zeros_like(f);
  render_backward(f, fwd, Eigen::VectorXd::Zero(1), 1.0, grad);
  // raw = sum over the rank-1 X component only: line(=1) * plane(=raw).
  // d raw / d plane_entries sums to 1 over the bilinear stencil.
  const double dw_draw = 0.5 * sigmoid(raw);
  CHECK(grad.density_planes[0].sum() == doctest::Approx(dw_draw));
  CHECK(grad.density_lines[0].sum() == doctest::Approx(dw_draw * raw));
}

TEST_CASE("backward pass contracts") {
  const RadianceField f = random_field(GridGeometry{}, 2, 3, 32);
  Ray ray{{0.0, 0.0, -3.0}, {0.0, 0.0, 1.0}};
  SamplingSpec s;
  s.samples = 16;
  s.near = 1.0;
  s.far = 5.0;
  const RayForward fwd = forward_ray(f, ray, sample_depths(s, 0));

  FieldGradient zero = FieldGradient::zeros_like(f);
  render_backward(f, fwd, Eigen::VectorXd::Zero(3), 0.0, zero);
  CHECK(zero.squared_norm() == 0.0);

  RadianceField moved = f;
  apply_gradient_step(moved, zero, 1.0, 1.0);
  CHECK(moved.revision == f.revision + 1);
  FieldGradient g = FieldGradient::zeros_like(f);
  expect_error(ErrorKind::kContract,
               [&] { render_backward(moved, fwd, Eigen::VectorXd::Ones(3), 1.0, g); });
  expect_error(ErrorKind::kDomain,
               [&] { render_backward(f, fwd, Eigen::VectorXd::Ones(2), 1.0, g); });
}

TEST_CASE("analytic gradients match central differences") {
  const RadianceField f = random_field(GridGeometry{}, 2, 3, 33, -0.6, 0.6);
  const Camera cam = Camera::look_at({0, -3, 0.3}, Eigen::Vector3d::Zero(), {0, 0, 1}, 6, 6, 45);
  SamplingSpec s;
  s.samples = 24;
  s.near = 1.5;
  s.far = 4.5;
  GradientCheckSpec spec;
  spec.per_group = 10;
  spec.rays = 16;
  const PropertyReport r = check_gradients(f, cam, s, spec);
  CHECK(r.instances == 50);
  CHECK_MESSAGE(r.pass, "max relative error " << r.max_error);
}

TEST_CASE("a small step along the negative gradient lowers the batch loss") {
  const Tiny t = tiny_setup();
  const RadianceField f = initialize_field(t.layout, 1);
  const LinearReadout readout = random_readout(4, 2);
  std::vector<RaySample> rays;
  for (int k = 0; k < 20; ++k) rays.push_back({k % 2, (3 * k) % 8, (5 * k + 1) % 8});
  const BatchResult before = evaluate_batch(f, t.views, rays, t.spec, readout, 1.0, true);
  const BatchResult again = evaluate_batch(f, t.views, rays, t.spec, readout, 1.0, false);
  CHECK(again.loss.total == before.loss.total);
  for (double lr : {1e-2, 1e-3}) {
    RadianceField g = f;
    apply_gradient_step(g, before.gradient, lr, lr);
    const BatchResult after = evaluate_batch(g, t.views, rays, t.spec, readout, 1.0, false);
    CHECK(after.loss.total < before.loss.total);
  }
  const std::vector<RaySample> bad{{2, 0, 0}};
  expect_error(ErrorKind::kDomain,
               [&] { evaluate_batch(f, t.views, bad, t.spec, readout, 1.0, false); });
}

TEST_CASE("stage-1 fit: zero iterations, determinism and progress") {
  const Tiny t = tiny_setup();
  // The default step suits 32^3 grids; coarse grids share each entry
  // across more rays and need a smaller one.
  Stage1Config c;
  c.learning_rate = 3.0;
  c.iterations = 0;
  c.seed = 4;
  const Stage1Result zero = fit_stage1(t.views, t.layout, t.spec, c);
  CHECK(zero.curve.empty());
  CHECK(zero.field.feature.basis == initialize_field(t.layout, 4).feature.basis);
  CHECK(zero.final.total == zero.initial.total);

  c.iterations = 40;
  c.rays_per_batch = 32;
  const Stage1Result a = fit_stage1(t.views, t.layout, t.spec, c);
  const Stage1Result b = fit_stage1(t.views, t.layout, t.spec, c);
  CHECK(a.curve.size() == 40);
  CHECK(a.final.total == b.final.total);
  CHECK(a.field.feature.basis == b.field.feature.basis);
  CHECK(a.decoder.params.weight == b.decoder.params.weight);
  CHECK(a.final.total < a.initial.total);

  std::vector<TrainingView> one{t.views[0]};
  expect_error(ErrorKind::kDomain, [&] { fit_stage1(one, t.layout, t.spec, c); });
  FieldLayout wrong = t.layout;
  wrong.channels = 5;
  expect_error(ErrorKind::kDomain, [&] { fit_stage1(t.views, wrong, t.spec, c); });
}

TEST_CASE("a huge learning rate reports divergence") {
  const Tiny t = tiny_setup();
  Stage1Config c;
  c.iterations = 50;
  c.learning_rate = 1e9;
  expect_error(ErrorKind::kDomain, [&] { fit_stage1(t.views, t.layout, t.spec, c); });
}

TEST_CASE("stylization metrics") {
  FeatureMap content(2, 1, 2), styled(2, 1, 2);
  content.data << 0, 0, 0, 0;
  styled.data << 1, 3, 1, 3;  // mean 2, std 1
  StyleStats s;
  s.mu = 2.0;
  s.sigma = 1.0;
  const StylizationMetrics m = stylization_metrics(styled, content, s, 10.0);
  CHECK(m.content == doctest::Approx(5.0));
  CHECK(m.style == doctest::Approx(0.0));
  s.mu = 0.0;
  s.sigma = 3.0;
  const StylizationMetrics m2 = stylization_metrics(styled, content, s, 10.0);
  CHECK(m2.style == doctest::Approx(8.0));
  CHECK(m2.total == doctest::Approx(85.0));
  expect_error(ErrorKind::kDomain,
               [&] { stylization_metrics(FeatureMap(1, 1, 2), content, s, 1.0); });
}
