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

// File formats. Everything binary is little-endian with f32 storage; values
// are widened to double on load.
//
// Checkpoint (.srfg):
//   "SRFG" | u32 version = 1 | sections...
//   section = u32 tag | u64 length | payload[length]
//
//   tag 1  geometry       u32 n[3], f32 bbox_min[3], f32 bbox_max[3]
//   tag 2  feature factors u32 R, u32 C, then for axis 0..2: line (R x n_a)
//                         then plane (R x n_b n_c), row-major
//   tag 3  density factors u32 R, then the same line/plane arrays
//   tag 4  basis          u32 rows, u32 cols, row-major f32
//   tag 5  normalization  f32 mean[C], f32 var[C], f32 momentum, f32 eps
//   tag 6  attention      u32 C', u32 C, query, key, value (C' x C each)
//   tag 7  style conv     u32 rows, u32 cols, row-major f32
//   tag 8  decoder        u32 C, f32 weight[3 x C], f32 bias[3], f32 bg[3]
//   tag 9  reserved
//
// Sections are written in tag order. Unknown and reserved tags are skipped
// and noted in Checkpoint::warnings.
//
// Tensor (.srft): "SRFT" | u32 version = 1 | u32 ndim | u32 dims[ndim] |
// f32 data, last dimension fastest.
//
// Images: binary PPM (P6, maxval 255).

#ifndef FGSTYLE_IO_HPP_
#define FGSTYLE_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fgstyle/common.hpp"
#include "fgstyle/decoder.hpp"
#include "fgstyle/grid.hpp"
#include "fgstyle/render.hpp"
#include "fgstyle/scene.hpp"
#include "fgstyle/sict.hpp"
#include "fgstyle/style.hpp"
#include "fgstyle/trainer.hpp"

namespace fgstyle {

enum class FormatCode {
  kBadMagic,
  kBadVersion,
  kTruncated,
  kDimensionMismatch,
  kMissingSection,
  kDuplicateSection,
  kNonFinite,
  kBadHeader,
  kInvalidValue,  // well-formed but violates a model invariant
};

const char *to_string(FormatCode code);

/// kFormat error with a machine-checkable code.
class FormatError : public Error {
 public:
  FormatError(FormatCode code, const std::string &what)
      : Error(ErrorKind::kFormat, std::string(to_string(code)) + ": " + what),
        code_(code) {}

  FormatCode code() const noexcept { return code_; }

 private:
  FormatCode code_;
};

enum SectionTag : std::uint32_t {
  kTagGeometry = 1,
  kTagFeatureFactors = 2,
  kTagDensityFactors = 3,
  kTagBasis = 4,
  kTagNormalization = 5,
  kTagAttention = 6,
  kTagStyleConv = 7,
  kTagDecoder = 8,
  kTagReserved = 9,
};

struct Checkpoint {
  RadianceField field;
  std::optional<VolumeAdaptiveIN> normalization;
  std::optional<AttentionParams> attention;
  std::optional<DstParams> conv;
  std::optional<DecoderParams> decoder;
  std::vector<std::string> warnings;  // filled by the loader
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint &checkpoint);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t> &bytes);

void save_checkpoint(const std::filesystem::path &path, const Checkpoint &checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path &path);

struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
};

std::vector<std::uint8_t> encode_tensor(const Tensor &tensor);
Tensor decode_tensor(const std::vector<std::uint8_t> &bytes);
void save_tensor(const std::filesystem::path &path, const Tensor &tensor);
Tensor load_tensor(const std::filesystem::path &path);

/// H x W x C tensor <-> style features.
Tensor to_tensor(const StyleFeatures &features);
StyleFeatures style_from_tensor(const Tensor &tensor);
/// H x W x (C + 1) tensor, the last channel holding the ray weight.
Tensor to_tensor(const FeatureMap &map);

/// Values are written as round(clamp(x, 0, 1) * 255).
std::vector<std::uint8_t> encode_ppm(const RgbImage &image);
RgbImage decode_ppm(const std::vector<std::uint8_t> &bytes);
void write_ppm(const std::filesystem::path &path, const RgbImage &image);
RgbImage read_ppm(const std::filesystem::path &path);

std::vector<std::uint8_t> read_file(const std::filesystem::path &path);
void write_file(const std::filesystem::path &path,
                const std::vector<std::uint8_t> &bytes);

// ---------------------------------------------------------------------------
// Configuration.
//
// JSON object; every key is optional except "scene". Unknown keys are
// rejected with their dotted path.
//
//   scene:    { channels: 16, softness: 0.05,
//               primitives: [ { shape: "sphere" | "box" | "torus",
//                               center: [0,0,0], rotation_deg: [0,0,0],
//                               radius: 1, minor_radius: 0.25,
//                               half_extents: [0.5,0.5,0.5],
//                               amplitude: 20, offset: [C values] } ] }
//   grid:     { resolution: [32,32,32], bbox_min: [-1.5,-1.5,-1.5],
//               bbox_max: [1.5,1.5,1.5], rank: 8 }
//   cameras:  { count: 4, radius: 4, elevation_deg: 20, target: [0,0,0],
//               width: 64, height: 64, fov_deg: 40 }
//   sampling: { samples: 64, near: 2, far: 6, stratified: false, seed: 0 }
//   reference_samples: 512
//   training: { learning_rate, iterations, rays_per_batch, seed,
//               rgb_loss_weight, density_lr_scale, init_scale }
//               (defaults as in Stage1Config)
//   sict:     { reduced_channels: 8, momentum: 0.1, epsilon: 1e-5,
//               calibration_points: 65536, batch_size: 256, seed: 0 }
//   styles:   [ "path.ppm" | "path.srft" | "identity", ... ]
//   background: [1, 1, 1]
//
// rotation_deg is applied as Rz * Ry * Rx. Feature channels of the grid
// equal scene.channels. Relative style paths resolve against the config
// file's directory.

struct CameraRig {
  int count = 4;
  double radius = 4.0;
  double elevation_deg = 20.0;
  Eigen::Vector3d target = Eigen::Vector3d::Zero();
  int width = 64;
  int height = 64;
  double fov_deg = 40.0;

  std::vector<Camera> build() const;
};

struct SictConfig {
  int reduced_channels = 8;
  double momentum = 0.1;
  double epsilon = 1e-5;
  CalibrationSpec calibration;
};

struct PipelineConfig {
  SceneOracle scene;
  FieldLayout layout;
  CameraRig cameras;
  SamplingSpec sampling;
  int reference_samples = 512;
  Stage1Config training;
  SictConfig sict;
  std::vector<std::string> styles;
  Eigen::Vector3d background = Eigen::Vector3d::Ones();
};

/// Parses JSON text. `overrides` are "dotted.path=value" strings applied
/// before validation; value is parsed as JSON, falling back to a string.
/// Parse errors report line and column; schema errors report the path.
PipelineConfig parse_config(const std::string &text,
                            const std::vector<std::string> &overrides = {},
                            const std::filesystem::path &base_dir = {});
PipelineConfig read_config(const std::filesystem::path &path,
                           const std::vector<std::string> &overrides = {});

}  // namespace fgstyle

#endif  // FGSTYLE_IO_HPP_
