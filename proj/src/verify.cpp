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

#include "fgstyle/verify.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>

#include "fgstyle/style.hpp"
#include "fgstyle/trainer.hpp"

namespace fgstyle {

void PropertyReport::finalize() {
  switch (bound) {
    case Bound::kAtMost: pass = max_error <= tolerance; break;
    case Bound::kBelow: pass = max_error < tolerance; break;
    case Bound::kAbove: pass = max_error > tolerance; break;
  }
}

namespace {

int draw(Rng &rng, int lo, int hi) {
  return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

}  // namespace

template <typename Scalar>
PropertyReport check_equivalence(int trials, const EquivalenceDims &dims,
                                 std::uint64_t seed, double tolerance, bool zero_mu) {
  require(trials >= 1, "equivalence check needs at least one trial");
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  PropertyReport report;
  report.name = zero_mu ? "dst_equivalence_linear" : "dst_equivalence";
  report.tolerance = tolerance;
  Rng rng(seed);
  for (int t = 0; t < trials; ++t) {
    const int h = draw(rng, 1, dims.max_height);
    const int w = draw(rng, 1, dims.max_width);
    const int c = draw(rng, 1, dims.max_channels);
    const int cr = draw(rng, 1, dims.max_reduced_channels);

    const Eigen::MatrixXd a = rng.matrix(cr, cr + 2, -1.0, 1.0);
    StyleStats stats64;
    stats64.covariance = a * a.transpose() / double(cr + 2);
    stats64.transform = psd_sqrt(stats64.covariance);
    stats64.sigma = rng.uniform(0.2, 2.0);
    stats64.mu = zero_mu ? 0.0 : rng.uniform(-1.0, 1.0);
    const BasicStyleStats<Scalar> stats = stats64.cast<Scalar>();
    const BasicDstParams<Scalar> params{rng.matrix(c, cr, -1.0, 1.0).cast<Scalar>()};

    BasicFeatureMap<Scalar> map(w, h, cr);
    std::vector<Vector> pointwise(std::size_t(w) * h);
    for (Eigen::Index p = 0; p < map.pixel_count(); ++p) {
      const int n = draw(rng, 1, dims.max_samples);
      Eigen::VectorXd densities(n), deltas(n);
      for (int i = 0; i < n; ++i) {
        densities[i] = rng.uniform(0.0, 4.0);
        deltas[i] = rng.uniform(0.01, 0.5);
      }
      const Vector weights = compute_weights(densities, deltas).weights.cast<Scalar>();
      const Matrix points = rng.matrix(n, cr, -1.0, 1.0).cast<Scalar>();
      map.data.row(p) = (weights.transpose() * points).eval();
      map.ray_weight[p] = weights.sum();
      pointwise[std::size_t(p)] = apply_pointwise_style(points, weights, stats, params);
    }

    const BasicFeatureMap<Scalar> deferred = apply_dst(map, stats, params);
    for (Eigen::Index p = 0; p < map.pixel_count(); ++p) {
      const double diff = (deferred.data.row(p).transpose() - pointwise[std::size_t(p)])
                              .template cast<double>()
                              .cwiseAbs()
                              .maxCoeff();
      report.max_error = std::max(report.max_error, diff);
    }
    ++report.instances;
  }
  report.finalize();
  return report;
}

template PropertyReport check_equivalence<float>(int, const EquivalenceDims &,
                                                 std::uint64_t, double, bool);
template PropertyReport check_equivalence<double>(int, const EquivalenceDims &,
                                                  std::uint64_t, double, bool);

PropertyReport check_sampling_invariance(const VolumeAdaptiveIN &state,
                                         const AttentionParams &params, int probes,
                                         int variants, std::uint64_t seed) {
  require(probes >= 1 && variants >= 1, "need at least one probe and one variant");
  if (state.mode == NormMode::kTrain)
    throw_error(ErrorKind::kContract,
                "sampling invariance is defined for eval or vanilla statistics");
  state.validate();
  const bool eval = state.mode == NormMode::kEval;
  const int c = state.channels();
  require(params.channels() == c, "attention does not match normalization channels");

  PropertyReport report;
  report.name = eval ? "sict_sampling_invariance" : "vanilla_in_inconsistency";
  report.tolerance = eval ? 0.0 : 1e-3;
  report.bound = eval ? Bound::kAtMost : Bound::kAbove;

  const Eigen::ArrayXd spread = (state.running_var.array() + state.epsilon).sqrt();
  Rng rng(seed);
  auto random_point = [&](double scale, double shift) {
    Eigen::RowVectorXd x(c);
    for (int k = 0; k < c; ++k)
      x[k] = state.running_mean[k] + spread[k] * (shift + scale * rng.uniform(-2.0, 2.0));
    return x;
  };
  auto batch_of = [&](const Eigen::MatrixXd &features) {
    PointBatch b;
    b.features = features;
    b.valid = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(features.rows(), true);
    return b;
  };

  for (int p = 0; p < probes; ++p) {
    const Eigen::RowVectorXd probe = random_point(1.0, 0.0);
    const Eigen::RowVectorXd alone = apply_sict(batch_of(probe), state, params).row(0);

    for (int v = 0; v < variants; ++v) {
      const int size = draw(rng, 2, 64);
      const int slot = draw(rng, 0, size - 1);
      // Each batch has its own offset and spread, so batch statistics differ.
      const double scale = rng.uniform(0.1, 3.0), shift = rng.uniform(-2.0, 2.0);
      Eigen::MatrixXd features(size, c);
      for (int i = 0; i < size; ++i) features.row(i) = random_point(scale, shift);
      features.row(slot) = probe;
      const Eigen::MatrixXd out = apply_sict(batch_of(features), state, params);
      report.max_error =
          std::max(report.max_error, (out.row(slot) - alone).cwiseAbs().maxCoeff());
      ++report.instances;

      if (eval && v == 0) {
        // A permuted batch must give the permuted outputs.
        std::vector<int> order(size);
        std::iota(order.begin(), order.end(), 0);
        for (int i = size - 1; i > 0; --i) std::swap(order[i], order[draw(rng, 0, i)]);
        Eigen::MatrixXd permuted(size, c);
        for (int i = 0; i < size; ++i) permuted.row(i) = features.row(order[i]);
        const Eigen::MatrixXd pout = apply_sict(batch_of(permuted), state, params);
        for (int i = 0; i < size; ++i)
          report.max_error = std::max(
              report.max_error, (pout.row(i) - out.row(order[i])).cwiseAbs().maxCoeff());
        ++report.instances;
      }
    }
  }
  report.finalize();
  return report;
}

PropertyReport check_telescoping(int rays, std::uint64_t seed, double tolerance) {
  require(rays >= 1, "telescoping check needs at least one ray");
  PropertyReport report;
  report.name = "weight_telescoping";
  report.tolerance = tolerance;
  Rng rng(seed);
  for (int r = 0; r < rays; ++r) {
    const int n = draw(rng, 1, 128);
    Eigen::VectorXd densities(n), deltas(n);
    for (int i = 0; i < n; ++i) {
      densities[i] = rng.uniform() < 0.3 ? 0.0 : rng.uniform(0.0, 20.0);
      deltas[i] = rng.uniform(0.0, 0.2);
    }
    const RayWeights w = compute_weights(densities, deltas);
    const double optical = densities.dot(deltas);
    const double expected = -std::expm1(-optical);
    report.max_error = std::max(report.max_error, std::abs(w.weights.sum() - expected));
    ++report.instances;
  }
  report.finalize();
  return report;
}

namespace {

struct ParamRef {
  int group;  // 0..4
  int axis;
  Eigen::Index index;
};

Eigen::MatrixXd &param_matrix(RadianceField &f, int group, int axis) {
  switch (group) {
    case 0: return f.feature.factors.lines[axis];
    case 1: return f.feature.factors.planes[axis];
    case 2: return f.feature.basis;
    case 3: return f.density.factors.lines[axis];
    default: return f.density.factors.planes[axis];
  }
}

const Eigen::MatrixXd &grad_matrix(const FieldGradient &g, int group, int axis) {
  switch (group) {
    case 0: return g.feature_lines[axis];
    case 1: return g.feature_planes[axis];
    case 2: return g.basis;
    case 3: return g.density_lines[axis];
    default: return g.density_planes[axis];
  }
}

}  // namespace

PropertyReport check_gradients(const RadianceField &field, const Camera &camera,
                               const SamplingSpec &sampling,
                               const GradientCheckSpec &spec) {
  field.validate();
  camera.validate();
  require(spec.per_group >= 1 && spec.step > 0.0 && spec.rays >= 1,
          "gradient check needs positive counts and step");
  Rng rng(spec.seed);
  const int c = field.channels();

  TrainingView view;
  view.camera = camera;
  view.features = FeatureMap(camera.width, camera.height, c);
  view.features.data = rng.matrix(view.features.pixel_count(), c, -1.0, 1.0);
  view.rgb = RgbImage(camera.width, camera.height);
  view.rgb.pixels = rng.matrix(view.rgb.pixels.rows(), 3, 0.0, 1.0);
  LinearReadout readout;
  readout.weight = rng.matrix(3, c, -0.5, 0.5);
  readout.bias = rng.matrix(3, 1, 0.0, 0.5);
  const std::vector<TrainingView> views{view};

  std::vector<RaySample> rays;
  for (int r = 0; r < spec.rays; ++r)
    rays.push_back({0, int(rng.below(std::uint64_t(camera.width))),
                    int(rng.below(std::uint64_t(camera.height)))});
  const double rgb_weight = 1.0;
  const BatchResult analytic =
      evaluate_batch(field, views, rays, sampling, readout, rgb_weight, true);

  PropertyReport report;
  report.name = "gradient_finite_difference";
  report.tolerance = spec.tolerance;

  RadianceField probe = field;
  for (int group = 0; group < 5; ++group) {
    std::vector<ParamRef> candidates;
    for (int axis = 0; axis < (group == 2 ? 1 : 3); ++axis) {
      const Eigen::MatrixXd &g = grad_matrix(analytic.gradient, group, axis);
      for (Eigen::Index i = 0; i < g.size(); ++i)
        if (std::abs(g.data()[i]) > 1e-6) candidates.push_back({group, axis, i});
    }
    // Small groups (a 4 x 6 basis, say) are checked in full.
    require(!candidates.empty(),
            "a parameter group has no measurable gradient; increase the ray count");
    const std::size_t count =
        std::min(candidates.size(), static_cast<std::size_t>(spec.per_group));
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t pick = k + rng.below(candidates.size() - k);
      std::swap(candidates[k], candidates[pick]);
      const ParamRef ref = candidates[k];
      double &x = param_matrix(probe, ref.group, ref.axis).data()[ref.index];
      const double saved = x;
      x = saved + spec.step;
      const double up =
          evaluate_batch(probe, views, rays, sampling, readout, rgb_weight, false).loss.total;
      x = saved - spec.step;
      const double down =
          evaluate_batch(probe, views, rays, sampling, readout, rgb_weight, false).loss.total;
      x = saved;
      const double numeric = (up - down) / (2.0 * spec.step);
      const double exact =
          grad_matrix(analytic.gradient, ref.group, ref.axis).data()[ref.index];
      const double err =
          std::abs(exact - numeric) / std::max(std::abs(exact), std::abs(numeric));
      report.max_error = std::max(report.max_error, err);
      ++report.instances;
    }
  }
  report.finalize();
  return report;
}

PropertyReport check_reconstruction(const VMFeatureField &field, double tolerance) {
  field.validate();
  const DenseTensor dense = reconstruct_dense(field);
  const VMFactors &f = field.factors;
  const auto &n = f.geometry.resolution;
  const int c = field.channels();

  PropertyReport report;
  report.name = "vm_reconstruction";
  report.tolerance = tolerance;
  Eigen::VectorXd comps(f.components());
  for (int k = 0; k < n[2]; ++k)
    for (int j = 0; j < n[1]; ++j)
      for (int i = 0; i < n[0]; ++i) {
        const int idx[3] = {i, j, k};
        for (int a = 0; a < 3; ++a) {
          const auto [b, d] = kPlaneAxes[a];
          for (int r = 0; r < f.rank; ++r)
            comps[a * f.rank + r] =
                f.lines[a](r, idx[a]) * f.planes[a](r, idx[b] + n[b] * idx[d]);
        }
        for (int ch = 0; ch < c; ++ch) {
          double v = 0.0;
          for (int q = 0; q < f.components(); ++q) v += field.basis(ch, q) * comps[q];
          report.max_error =
              std::max(report.max_error, std::abs(v - dense.at(i, j, k, ch)));
        }
        ++report.instances;
      }
  report.finalize();
  return report;
}

PropertyReport check_compactness(int resolution, int rank, int channels) {
  GridGeometry g;
  g.resolution = {resolution, resolution, resolution};
  const VMFeatureField field = VMFeatureField::zeros(g, rank, channels);
  PropertyReport report;
  report.name = "vm_parameter_ratio";
  report.instances = 1;
  report.max_error = double(field.parameter_count()) /
                     (double(g.node_count()) * double(channels));
  report.tolerance = 1.0;
  report.bound = Bound::kBelow;
  report.finalize();
  return report;
}

bool all_pass(const std::vector<PropertyReport> &reports) {
  return std::all_of(reports.begin(), reports.end(),
                     [](const PropertyReport &r) { return r.pass; });
}

namespace {

const char *bound_name(Bound b) {
  switch (b) {
    case Bound::kAtMost: return "<=";
    case Bound::kBelow: return "<";
    case Bound::kAbove: return ">";
  }
  return "?";
}

}  // namespace

void write_report_text(std::ostream &out, const std::vector<PropertyReport> &reports) {
  for (const PropertyReport &r : reports)
    out << (r.pass ? "PASS " : "FAIL ") << r.name << " instances=" << r.instances
        << std::setprecision(6) << std::scientific << " max_error=" << r.max_error
        << " tolerance" << bound_name(r.bound) << r.tolerance << std::defaultfloat
        << '\n';
}

void write_report_csv(std::ostream &out, const std::vector<PropertyReport> &reports) {
  out << "property,instances,max_error,tolerance,bound,pass\n";
  for (const PropertyReport &r : reports)
    out << r.name << ',' << r.instances << ',' << std::setprecision(17) << r.max_error
        << ',' << r.tolerance << ',' << bound_name(r.bound) << ','
        << (r.pass ? "true" : "false") << '\n';
}

}  // namespace fgstyle
