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

#include "fgstyle/style.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace fgstyle {

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd &symmetric) {
  require(symmetric.rows() == symmetric.cols(), "psd_sqrt needs a square matrix");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(symmetric);
  require(solver.info() == Eigen::Success, "symmetric eigensolver did not converge");
  const Eigen::VectorXd roots = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd &u = solver.eigenvectors();
  Eigen::MatrixXd t = u * roots.asDiagonal() * u.transpose();
  return 0.5 * (t + t.transpose());
}

StyleStats compute_style_stats(const StyleFeatures &features) {
  const Eigen::MatrixXd &x = features.data;
  require(x.cols() >= 1, "style features need at least one channel");
  require(x.rows() >= 2, "style statistics need at least two spatial samples");
  require(x.allFinite(), "style features must be finite");

  StyleStats s;
  const double count = static_cast<double>(x.size());
  s.mu = x.sum() / count;
  s.sigma = std::sqrt((x.array() - s.mu).square().sum() / count);

  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  s.covariance = (centered.transpose() * centered) / static_cast<double>(x.rows());
  s.covariance = 0.5 * (s.covariance + s.covariance.transpose());
  s.transform = psd_sqrt(s.covariance);
  return s;
}

StyleStats identity_style(int channels) {
  require(channels >= 1, "channel count must be positive");
  StyleStats s;
  s.mu = 0.0;
  s.sigma = 1.0;
  s.covariance = Eigen::MatrixXd::Identity(channels, channels);
  s.transform = Eigen::MatrixXd::Identity(channels, channels);
  return s;
}

DstParams default_dst_params(int channels, int reduced_channels) {
  require(channels >= 1 && reduced_channels >= 1, "channel counts must be positive");
  return DstParams{Eigen::MatrixXd::Identity(channels, reduced_channels)};
}

namespace {

void check_same_layout(std::span<const FeatureMap> maps) {
  require(!maps.empty(), "at least one feature map is required");
  for (const FeatureMap &m : maps)
    require(m.width == maps[0].width && m.height == maps[0].height &&
                m.channels() == maps[0].channels() &&
                m.ray_weight.size() == m.pixel_count(),
            "feature maps must share dimensions and channel count");
}

}  // namespace

FeatureMap interpolate_styles(std::span<const FeatureMap> maps,
                              std::span<const double> weights) {
  check_same_layout(maps);
  require(weights.size() == maps.size(), "one interpolation weight per map");
  double total = 0.0;
  for (double w : weights) {
    require(std::isfinite(w), "interpolation weights must be finite");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-6) {
    std::ostringstream msg;
    msg << "interpolation weights sum to " << total << ", expected 1";
    throw_error(ErrorKind::kDomain, msg.str());
  }

  FeatureMap out(maps[0].width, maps[0].height, maps[0].channels());
  for (std::size_t k = 0; k < maps.size(); ++k) {
    if (weights[k] == 0.0) continue;
    out.data += weights[k] * maps[k].data;
    out.ray_weight += weights[k] * maps[k].ray_weight;
  }
  return out;
}

FeatureMap composite_styles(std::span<const FeatureMap> maps,
                            std::span<const Eigen::VectorXd> masks) {
  check_same_layout(maps);
  require(masks.size() == maps.size(), "one mask per feature map");
  const Eigen::Index pixels = maps[0].pixel_count();
  Eigen::VectorXd coverage = Eigen::VectorXd::Zero(pixels);
  for (const Eigen::VectorXd &m : masks) {
    require(m.size() == pixels, "mask size must match the feature map");
    require((m.array() >= 0.0).all() && (m.array() <= 1.0).all(),
            "mask values must lie in [0, 1]");
    coverage += m;
  }
  const double worst = (coverage.array() - 1.0).abs().maxCoeff();
  if (worst > 1e-6) {
    std::ostringstream msg;
    msg << "masks do not partition unity (max deviation " << worst << ")";
    throw_error(ErrorKind::kDomain, msg.str());
  }

  FeatureMap out(maps[0].width, maps[0].height, maps[0].channels());
  for (std::size_t k = 0; k < maps.size(); ++k) {
    for (Eigen::Index p = 0; p < pixels; ++p) {
      const double m = masks[k][p];
      if (m == 0.0) continue;
      out.data.row(p) += m * maps[k].data.row(p);
      out.ray_weight[p] += m * maps[k].ray_weight[p];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Filter bank.

namespace {

using Plane = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += k[i + radius];
  }
  for (double &v : k) v /= total;
  return k;
}

std::vector<double> derivative_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double moment = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = i * std::exp(-0.5 * i * i / (sigma * sigma));
    moment += i * k[i + radius];
  }
  for (double &v : k) v /= moment;
  return k;
}

// Correlation along rows (horizontal) or columns (vertical), clamp to edge.
Plane filter_1d(const Plane &in, const std::vector<double> &k, bool horizontal) {
  const int radius = static_cast<int>(k.size() / 2);
  const Eigen::Index h = in.rows(), w = in.cols();
  Plane out(h, w);
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const Eigen::Index xx = horizontal ? std::clamp<Eigen::Index>(x + i, 0, w - 1) : x;
        const Eigen::Index yy = horizontal ? y : std::clamp<Eigen::Index>(y + i, 0, h - 1);
        acc += k[i + radius] * in(yy, xx);
      }
      out(y, x) = acc;
    }
  return out;
}

Plane separable(const Plane &in, const std::vector<double> &kx,
                const std::vector<double> &ky) {
  return filter_1d(filter_1d(in, kx, true), ky, false);
}

}  // namespace

StyleFeatures extract_style_features(const RgbImage &image, int channels) {
  require(channels >= 1 && channels <= kStyleBankSize,
          "requested style channels exceed the filter bank size");
  require(image.pixels.rows() == Eigen::Index(image.width) * image.height,
          "image pixel buffer does not match its dimensions");
  if (image.width < kStyleBankMaxKernel || image.height < kStyleBankMaxKernel) {
    std::ostringstream msg;
    msg << "style image " << image.width << "x" << image.height
        << " is smaller than the largest filter (" << kStyleBankMaxKernel << ")";
    throw_error(ErrorKind::kDomain, msg.str());
  }

  const int w = image.width, h = image.height;
  Plane luma(h, w), red(h, w), green(h, w), blue(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto px = image.pixels.row(Eigen::Index(y) * w + x);
      red(y, x) = px[0];
      green(y, x) = px[1];
      blue(y, x) = px[2];
      luma(y, x) = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
    }

  const auto g1 = gaussian_kernel(1.0), g2 = gaussian_kernel(2.0),
             g4 = gaussian_kernel(4.0);
  const auto d1 = derivative_kernel(1.0), d2 = derivative_kernel(2.0);
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;

  std::vector<Plane> bank;
  bank.reserve(kStyleBankSize);
  const Plane blur1 = separable(luma, g1, g1);
  const Plane blur2 = separable(luma, g2, g2);
  const Plane blur4 = separable(luma, g4, g4);
  const Plane dx1 = separable(luma, d1, g1), dy1 = separable(luma, g1, d1);
  const Plane dx2 = separable(luma, d2, g2), dy2 = separable(luma, g2, d2);
  bank.push_back(blur1);
  bank.push_back(dx1);
  bank.push_back(dy1);
  bank.push_back(blur1 - blur2);
  bank.push_back(dx2);
  bank.push_back(dy2);
  bank.push_back(blur2 - blur4);
  bank.push_back((dx1 + dy1) * inv_sqrt2);
  bank.push_back((dx1 - dy1) * inv_sqrt2);
  bank.push_back((dx2 + dy2) * inv_sqrt2);
  bank.push_back((dx2 - dy2) * inv_sqrt2);
  bank.push_back(separable(red, g1, g1));
  bank.push_back(separable(green, g1, g1));
  bank.push_back(separable(blue, g1, g1));

  StyleFeatures out;
  out.width = (w + 1) / 2;
  out.height = (h + 1) / 2;
  out.data.resize(Eigen::Index(out.width) * out.height, channels);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      for (int c = 0; c < channels; ++c)
        out.data(Eigen::Index(y) * out.width + x, c) = bank[c](2 * y, 2 * x);
  return out;
}

}  // namespace fgstyle
