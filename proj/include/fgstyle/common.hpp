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

#ifndef FGSTYLE_COMMON_HPP_
#define FGSTYLE_COMMON_HPP_

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace fgstyle {

/// Error classes. The CLI maps these onto process exit codes.
enum class ErrorKind {
  kDomain,       // invalid argument values, NaN inputs, violated preconditions
  kOutOfDomain,  // point query outside the grid bounding box
  kResource,     // allocation cap exceeded
  kContract,     // API misuse (stale forward state, wrong mode)
  kFormat,       // malformed file contents
  kIo,           // filesystem failures
  kUsage,        // command-line misuse
};

const char *to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string &what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void throw_error(ErrorKind kind, const std::string &what);

inline void require(bool condition, const std::string &what) {
  if (!condition) throw_error(ErrorKind::kDomain, what);
}

// Pixel-major feature data: row p = v * width + u, one column per channel.
template <typename Scalar>
using PixelMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// An H x W image of C-channel features plus the per-pixel sum of ray
/// sample weights.
template <typename Scalar>
struct BasicFeatureMap {
  int width = 0;
  int height = 0;
  PixelMatrix<Scalar> data;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> ray_weight;

  BasicFeatureMap() = default;
  BasicFeatureMap(int w, int h, int channels)
      : width(w),
        height(h),
        data(PixelMatrix<Scalar>::Zero(Eigen::Index(w) * h, channels)),
        ray_weight(Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(
            Eigen::Index(w) * h)) {}

  int channels() const { return static_cast<int>(data.cols()); }
  Eigen::Index pixel_count() const { return data.rows(); }
  Eigen::Index index(int u, int v) const { return Eigen::Index(v) * width + u; }

  template <typename Other>
  BasicFeatureMap<Other> cast() const {
    BasicFeatureMap<Other> out;
    out.width = width;
    out.height = height;
    out.data = data.template cast<Other>();
    out.ray_weight = ray_weight.template cast<Other>();
    return out;
  }
};

using FeatureMap = BasicFeatureMap<double>;

/// Linear RGB image, pixel-major, values nominally in [0, 1].
struct RgbImage {
  int width = 0;
  int height = 0;
  Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> pixels;

  RgbImage() = default;
  RgbImage(int w, int h)
      : width(w), height(h), pixels(Eigen::Index(w) * h, 3) {
    pixels.setZero();
  }
};

// ---------------------------------------------------------------------------
// Random numbers.
//
// Seeds are mixed with SplitMix64:
//   z += 0x9E3779B97F4A7C15
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   z ^= z >> 31
// Streams are xorshift64* (shifts 12, 25, 27; multiplier
// 0x2545F4914F6CDD1D). Uniform doubles use the top 53 bits.

constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Per-pixel stream seed: splitmix64(splitmix64(seed) ^ (u | v << 32)).
constexpr std::uint64_t pixel_seed(std::uint64_t seed, std::uint32_t u,
                                   std::uint32_t v) {
  return splitmix64(splitmix64(seed) ^
                    (std::uint64_t(u) | (std::uint64_t(v) << 32)));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(splitmix64(seed)) {
    if (state_ == 0) state_ = 0x9E3779B97F4A7C15ull;
  }

  std::uint64_t next() {
    state_ ^= state_ >> 12;
    state_ ^= state_ << 25;
    state_ ^= state_ >> 27;
    return state_ * 0x2545F4914F6CDD1Dull;
  }

  /// Uniform in [0, 1).
  double uniform() { return double(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next() % n; }

  Eigen::MatrixXd matrix(Eigen::Index rows, Eigen::Index cols, double lo,
                         double hi) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = uniform(lo, hi);
    return m;
  }

 private:
  std::uint64_t state_;
};

// ---------------------------------------------------------------------------
// Parallelism.

/// Worker count: STYLERF_THREADS if set and positive, otherwise the
/// hardware concurrency.
unsigned thread_count();

/// Calls body(i) for i in [0, n). Work is split into contiguous blocks;
/// callers must write only to slots owned by i so the result does not
/// depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)> &body);

}  // namespace fgstyle

#endif  // FGSTYLE_COMMON_HPP_
