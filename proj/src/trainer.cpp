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

#include "fgstyle/trainer.hpp"

#include <cmath>
#include <sstream>

namespace fgstyle {

void Stage1Config::validate() const {
  require(learning_rate > 0.0 && std::isfinite(learning_rate),
          "learning_rate must be positive");
  require(iterations >= 0, "iterations must be >= 0");
  require(rays_per_batch >= 1, "rays_per_batch must be >= 1");
  require(rgb_loss_weight >= 0.0, "rgb_loss_weight must be >= 0");
  require(density_lr_scale > 0.0, "density_lr_scale must be positive");
  require(init_scale > 0.0, "init_scale must be positive");
}

LossReport grid_loss(const Eigen::MatrixXd &pred_features,
                     const Eigen::MatrixXd &gt_features,
                     const Eigen::MatrixXd &pred_rgb, const Eigen::MatrixXd &gt_rgb,
                     double weight) {
  require(pred_features.rows() == gt_features.rows() &&
              pred_features.cols() == gt_features.cols(),
          "predicted and ground-truth features differ in shape");
  require(pred_rgb.rows() == gt_rgb.rows() && pred_rgb.cols() == gt_rgb.cols(),
          "predicted and ground-truth RGB differ in shape");
  require(pred_features.size() > 0 && pred_rgb.size() > 0, "loss inputs are empty");
  LossReport r;
  r.feature_mse = (pred_features - gt_features).squaredNorm() /
                  static_cast<double>(pred_features.size());
  r.rgb_mse = (pred_rgb - gt_rgb).squaredNorm() / static_cast<double>(pred_rgb.size());
  r.total = r.feature_mse + weight * r.rgb_mse;
  return r;
}

// ---------------------------------------------------------------------------

FieldGradient FieldGradient::zeros_like(const RadianceField &field) {
  FieldGradient g;
  for (int a = 0; a < 3; ++a) {
    const auto &ff = field.feature.factors;
    const auto &df = field.density.factors;
    g.feature_lines[a] = Eigen::MatrixXd::Zero(ff.lines[a].rows(), ff.lines[a].cols());
    g.feature_planes[a] = Eigen::MatrixXd::Zero(ff.planes[a].rows(), ff.planes[a].cols());
    g.density_lines[a] = Eigen::MatrixXd::Zero(df.lines[a].rows(), df.lines[a].cols());
    g.density_planes[a] = Eigen::MatrixXd::Zero(df.planes[a].rows(), df.planes[a].cols());
  }
  g.basis = Eigen::MatrixXd::Zero(field.feature.basis.rows(), field.feature.basis.cols());
  return g;
}

FieldGradient &FieldGradient::operator+=(const FieldGradient &other) {
  for (int a = 0; a < 3; ++a) {
    feature_lines[a] += other.feature_lines[a];
    feature_planes[a] += other.feature_planes[a];
    density_lines[a] += other.density_lines[a];
    density_planes[a] += other.density_planes[a];
  }
  basis += other.basis;
  return *this;
}

double FieldGradient::squared_norm() const {
  double s = basis.squaredNorm();
  for (int a = 0; a < 3; ++a)
    s += feature_lines[a].squaredNorm() + feature_planes[a].squaredNorm() +
         density_lines[a].squaredNorm() + density_planes[a].squaredNorm();
  return s;
}

void apply_gradient_step(RadianceField &field, const FieldGradient &gradient,
                         double step, double density_step) {
  for (int a = 0; a < 3; ++a) {
    field.feature.factors.lines[a] -= step * gradient.feature_lines[a];
    field.feature.factors.planes[a] -= step * gradient.feature_planes[a];
    field.density.factors.lines[a] -= density_step * gradient.density_lines[a];
    field.density.factors.planes[a] -= density_step * gradient.density_planes[a];
  }
  field.feature.basis -= step * gradient.basis;
  ++field.revision;
}

// ---------------------------------------------------------------------------

RayForward forward_ray(const RadianceField &field, const Ray &ray,
                       const DepthSamples &samples) {
  const GridGeometry &geometry = field.geometry();
  const int n = static_cast<int>(samples.depths.size());
  RayForward f;
  f.revision = field.revision;
  f.stencils.reserve(n);
  f.sample_index.reserve(n);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d x = ray.origin + samples.depths[i] * ray.direction;
    if (!x.allFinite() || !geometry.contains(x)) continue;
    f.stencils.push_back(make_stencil(geometry, x));
    f.sample_index.push_back(i);
  }

  const int m = static_cast<int>(f.stencils.size());
  const int comps = field.feature.factors.components();
  f.feature_components.resize(comps, m);
  f.features.resize(field.channels(), m);
  f.raw_density.resize(m);
  f.optical.resize(m);
  f.deltas.resize(m);
  f.weights.resize(m);
  f.transmittance_after.resize(m);
  f.feature = Eigen::VectorXd::Zero(field.channels());

  double optical_depth = 0.0;
  for (int k = 0; k < m; ++k) {
    f.feature_components.col(k) = component_values(field.feature.factors, f.stencils[k]);
    f.features.col(k) = field.feature.basis * f.feature_components.col(k);
    f.raw_density[k] = component_values(field.density.factors, f.stencils[k]).sum();
    f.deltas[k] = samples.deltas[f.sample_index[k]];
    f.optical[k] = softplus(f.raw_density[k]) * f.deltas[k];
    f.weights[k] = std::exp(-optical_depth) * -std::expm1(-f.optical[k]);
    optical_depth += f.optical[k];
    f.transmittance_after[k] = std::exp(-optical_depth);
    f.feature += f.weights[k] * f.features.col(k);
    f.ray_weight += f.weights[k];
  }
  return f;
}

namespace {

// Pushes d(loss)/d(component) for every component at one stencil into the
// line and plane factor gradients.
void scatter_components(const VMFactors &factors, const PointStencil &stencil,
                        const Eigen::VectorXd &grad_components,
                        std::array<Eigen::MatrixXd, 3> &grad_lines,
                        std::array<Eigen::MatrixXd, 3> &grad_planes) {
  const int R = factors.rank;
  for (int a = 0; a < 3; ++a) {
    const AxisStencil &s = stencil[a];
    const Eigen::MatrixXd &line = factors.lines[a];
    const Eigen::MatrixXd &plane = factors.planes[a];
    for (int r = 0; r < R; ++r) {
      const double g = grad_components[a * R + r];
      if (g == 0.0) continue;
      const double l = s.line_weight[0] * line(r, s.line_index[0]) +
                       s.line_weight[1] * line(r, s.line_index[1]);
      double p = 0.0;
      for (int t = 0; t < 4; ++t) p += s.plane_weight[t] * plane(r, s.plane_index[t]);
      for (int t = 0; t < 2; ++t)
        grad_lines[a](r, s.line_index[t]) += s.line_weight[t] * g * p;
      for (int t = 0; t < 4; ++t)
        grad_planes[a](r, s.plane_index[t]) += s.plane_weight[t] * g * l;
    }
  }
}

}  // namespace

void render_backward(const RadianceField &field, const RayForward &forward,
                     const Eigen::VectorXd &grad_feature, double grad_ray_weight,
                     FieldGradient &gradient) {
  if (forward.revision != field.revision)
    throw_error(ErrorKind::kContract,
                "backward pass called with forward state from an older field revision");
  require(grad_feature.size() == field.channels(),
          "feature gradient does not match channel count");
  const int m = static_cast<int>(forward.stencils.size());
  const int comps = field.feature.factors.components();

  // dL/dw_k for each sample.
  Eigen::VectorXd grad_w(m);
  for (int k = 0; k < m; ++k)
    grad_w[k] = grad_feature.dot(forward.features.col(k)) + grad_ray_weight;

  // dw_i/da_k = -w_i (i > k), T_{k+1} (i == k), 0 (i < k).
  Eigen::VectorXd grad_components(comps);
  double suffix = 0.0;
  for (int k = m - 1; k >= 0; --k) {
    const double grad_a = grad_w[k] * forward.transmittance_after[k] - suffix;
    suffix += grad_w[k] * forward.weights[k];
    const double grad_raw = grad_a * forward.deltas[k] * sigmoid(forward.raw_density[k]);
    if (grad_raw != 0.0) {
      grad_components.setConstant(grad_raw);
      scatter_components(field.density.factors, forward.stencils[k], grad_components,
                         gradient.density_lines, gradient.density_planes);
    }

    const double w = forward.weights[k];
    if (w == 0.0) continue;
    const Eigen::VectorXd grad_f = w * grad_feature;
    gradient.basis.noalias() += grad_f * forward.feature_components.col(k).transpose();
    grad_components.noalias() = field.feature.basis.transpose() * grad_f;
    scatter_components(field.feature.factors, forward.stencils[k], grad_components,
                       gradient.feature_lines, gradient.feature_planes);
  }
}

LinearReadout LinearReadout::from(const DecoderParams &params) {
  return LinearReadout{params.weight, params.bias, params.background};
}

// ---------------------------------------------------------------------------

namespace {

SamplingSpec fixed_layout(const SamplingSpec &spec) {
  SamplingSpec s = spec;
  s.stratified = false;
  return s;
}

}  // namespace

BatchResult evaluate_batch(const RadianceField &field,
                           std::span<const TrainingView> views,
                           std::span<const RaySample> rays, const SamplingSpec &spec,
                           const LinearReadout &readout, double rgb_weight,
                           bool with_gradient) {
  require(!rays.empty(), "ray batch is empty");
  require(readout.weight.cols() == field.channels(),
          "RGB readout does not match field channels");
  const DepthSamples samples = sample_depths(fixed_layout(spec), 0);
  const int channels = field.channels();
  const double n_feature = static_cast<double>(rays.size()) * channels;
  const double n_rgb = static_cast<double>(rays.size()) * 3.0;

  BatchResult result;
  if (with_gradient) result.gradient = FieldGradient::zeros_like(field);
  double feature_sq = 0.0, rgb_sq = 0.0;
  for (const RaySample &rs : rays) {
    require(rs.view >= 0 && rs.view < static_cast<int>(views.size()),
            "ray sample references a missing view");
    const TrainingView &view = views[rs.view];
    const RayForward fwd = forward_ray(field, view.camera.ray(rs.u, rs.v), samples);
    const Eigen::Index p = view.features.index(rs.u, rs.v);

    const Eigen::VectorXd feature_err =
        fwd.feature - view.features.data.row(p).transpose();
    const Eigen::Vector3d rgb = readout.weight * fwd.feature + readout.bias +
                                (1.0 - fwd.ray_weight) * readout.background;
    const Eigen::Vector3d rgb_err = rgb - view.rgb.pixels.row(p).transpose();
    feature_sq += feature_err.squaredNorm();
    rgb_sq += rgb_err.squaredNorm();

    if (with_gradient) {
      const Eigen::Vector3d grad_rgb = rgb_weight * 2.0 / n_rgb * rgb_err;
      const Eigen::VectorXd grad_feature =
          2.0 / n_feature * feature_err + readout.weight.transpose() * grad_rgb;
      const double grad_ray_weight = -readout.background.dot(grad_rgb);
      render_backward(field, fwd, grad_feature, grad_ray_weight, result.gradient);
    }
  }
  result.loss.feature_mse = feature_sq / n_feature;
  result.loss.rgb_mse = rgb_sq / n_rgb;
  result.loss.total = result.loss.feature_mse + rgb_weight * result.loss.rgb_mse;
  return result;
}

RadianceField initialize_field(const FieldLayout &layout, std::uint64_t seed,
                               double init_scale) {
  require(init_scale > 0.0, "init_scale must be positive");
  RadianceField field;
  field.feature = VMFeatureField::zeros(layout.geometry, layout.rank, layout.channels);
  field.density = VMDensityField::zeros(layout.geometry, layout.rank);
  Rng rng(seed);
  auto fill = [&](Eigen::MatrixXd &m, double center, double spread) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        m(i, j) = center + rng.uniform(-spread, spread);
  };
  for (int a = 0; a < 3; ++a) {
    fill(field.feature.factors.lines[a], 0.0, init_scale);
    fill(field.feature.factors.planes[a], 0.0, init_scale);
  }
  fill(field.feature.basis, 0.0, init_scale);
  const double plane_level = -1.0 / (3.0 * layout.rank);
  for (int a = 0; a < 3; ++a) {
    fill(field.density.factors.lines[a], 1.0, 0.1);
    fill(field.density.factors.planes[a], plane_level, 0.01);
  }
  return field;
}

LossReport evaluate_views(const RadianceField &field,
                          std::span<const TrainingView> views,
                          const SamplingSpec &spec, const LinearReadout &readout,
                          double rgb_weight) {
  require(!views.empty(), "no training views");
  const SamplingSpec fixed = fixed_layout(spec);
  double feature_sq = 0.0, rgb_sq = 0.0, n_feature = 0.0, n_rgb = 0.0;
  for (const TrainingView &view : views) {
    const FeatureMap map = render_feature_map(field, view.camera, fixed);
    for (Eigen::Index p = 0; p < map.pixel_count(); ++p) {
      const Eigen::VectorXd f = map.data.row(p).transpose();
      const Eigen::Vector3d rgb = readout.weight * f + readout.bias +
                                  (1.0 - map.ray_weight[p]) * readout.background;
      feature_sq += (f - view.features.data.row(p).transpose()).squaredNorm();
      rgb_sq += (rgb - view.rgb.pixels.row(p).transpose()).squaredNorm();
    }
    n_feature += static_cast<double>(map.data.size());
    n_rgb += 3.0 * static_cast<double>(map.pixel_count());
  }
  LossReport r;
  r.feature_mse = feature_sq / n_feature;
  r.rgb_mse = rgb_sq / n_rgb;
  r.total = r.feature_mse + rgb_weight * r.rgb_mse;
  return r;
}

std::vector<TrainingView> make_training_views(const SceneOracle &scene,
                                              std::span<const Camera> cameras,
                                              int reference_samples,
                                              const SamplingSpec &spec,
                                              const Eigen::Vector3d &background) {
  SamplingSpec reference = fixed_layout(spec);
  reference.samples = reference_samples;
  std::vector<TrainingView> views;
  views.reserve(cameras.size());
  for (const Camera &cam : cameras) {
    ReferenceView ref = reference_render(scene, cam, reference, background);
    views.push_back(
        TrainingView{cam, std::move(ref.features), std::move(ref.rgb), background});
  }
  return views;
}

Stage1Result fit_stage1(std::span<const TrainingView> views, const FieldLayout &layout,
                        const SamplingSpec &spec, const Stage1Config &config) {
  config.validate();
  spec.validate();
  require(views.size() >= 2, "stage-1 fitting needs at least two cameras");
  for (const TrainingView &v : views)
    require(v.features.channels() == layout.channels,
            "training view channels do not match the field layout");

  const Eigen::Vector3d background = views[0].background;
  for (const TrainingView &v : views)
    require(v.background == background, "training views must share a background");

  // Fixed RGB readout for the loss: least squares from ground-truth
  // features to ground-truth colour.
  std::vector<FeatureMap> gt_maps;
  std::vector<RgbImage> gt_rgb;
  for (const TrainingView &v : views) {
    gt_maps.push_back(v.features);
    gt_rgb.push_back(v.rgb);
  }
  const LinearReadout readout =
      LinearReadout::from(fit_decoder(gt_maps, gt_rgb, background).params);

  Stage1Result result;
  result.field = initialize_field(layout, config.seed, config.init_scale);
  result.initial = evaluate_views(result.field, views, spec, readout,
                                  config.rgb_loss_weight);

  Rng rng(splitmix64(config.seed ^ 0x72617973616d706cull));
  std::vector<RaySample> batch(config.rays_per_batch);
  result.curve.reserve(config.iterations);
  for (int it = 0; it < config.iterations; ++it) {
    for (RaySample &rs : batch) {
      rs.view = static_cast<int>(rng.below(views.size()));
      const Camera &cam = views[rs.view].camera;
      rs.u = static_cast<int>(rng.below(cam.width));
      rs.v = static_cast<int>(rng.below(cam.height));
    }
    BatchResult step = evaluate_batch(result.field, views, batch, spec, readout,
                                      config.rgb_loss_weight, true);
    step.loss.iteration = it;
    if (!(step.loss.total < kDivergenceLimit)) {
      std::ostringstream msg;
      msg << "stage-1 fit diverged at iteration " << it << " (loss " << step.loss.total
          << ", learning rate " << config.learning_rate << ")";
      throw_error(ErrorKind::kDomain, msg.str());
    }
    result.curve.push_back(step.loss);
    apply_gradient_step(result.field, step.gradient, config.learning_rate,
                        config.learning_rate * config.density_lr_scale);
  }

  result.final = evaluate_views(result.field, views, spec, readout,
                                config.rgb_loss_weight);
  result.final.iteration = config.iterations;

  std::vector<FeatureMap> rendered;
  for (const TrainingView &v : views)
    rendered.push_back(render_feature_map(result.field, v.camera, fixed_layout(spec)));
  result.decoder = fit_decoder(rendered, gt_rgb, background);
  return result;
}

StylizationMetrics stylization_metrics(const FeatureMap &stylized,
                                       const FeatureMap &content,
                                       const StyleStats &stats, double lambda) {
  require(stylized.width == content.width && stylized.height == content.height &&
              stylized.channels() == content.channels(),
          "stylized and content maps differ in shape");
  require(stylized.data.size() > 0, "feature maps are empty");
  const double n = static_cast<double>(stylized.data.size());
  StylizationMetrics m;
  m.content = (stylized.data - content.data).squaredNorm() / n;
  const double mean = stylized.data.sum() / n;
  const double stddev = std::sqrt((stylized.data.array() - mean).square().sum() / n);
  m.style = (mean - stats.mu) * (mean - stats.mu) +
            (stddev - stats.sigma) * (stddev - stats.sigma);
  m.total = m.content + lambda * m.style;
  return m;
}

}  // namespace fgstyle
