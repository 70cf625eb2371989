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

// Command-line driver and the pipeline pieces it strings together.
//
//   fgstyle <subcommand> --config PATH [--out DIR] [--seed U64] [--samples N]
//                        [--set key=value]... [subcommand options]
//
//   synth        reference feature maps and images for every configured camera
//   fit          stage-1 grid fit; writes model.srfg and loss.csv
//   calibrate    volume statistics for the content transform, decoder refit
//   render       content pathway with the identity style
//   stylize      content pathway with --style (or the first configured style)
//   interpolate  weighted blend of several styles (--weights)
//   composite    per-pixel masks (--masks a.ppm,b.ppm or --split x|y)
//   verify       property checks; report in verify_report.txt / .csv
//   info         checkpoint summary (--config optional)
//
// --seed replaces the training, sampling and calibration seeds. Image
// outputs are <subcommand>_<camera>.ppm in the output directory.

#ifndef FGSTYLE_CLI_HPP_
#define FGSTYLE_CLI_HPP_

#include <ostream>
#include <string>
#include <vector>

#include "fgstyle/io.hpp"

namespace fgstyle {

inline constexpr int kExitOk = 0;
inline constexpr int kExitVerifyFailed = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitDomain = 3;
inline constexpr int kExitIo = 4;

/// kUsage -> 2; kFormat and kIo -> 4; everything else -> 3.
int exit_code(ErrorKind kind);

/// Throws kDomain unless the checkpoint carries the content transform,
/// style conv and decoder.
void require_pipeline(const Checkpoint &checkpoint);

/// Eval-mode content transform applied per sample, then volume rendering.
/// The result has C' channels.
FeatureMap render_content(const Checkpoint &checkpoint, const Camera &camera,
                          const SamplingSpec &sampling);

/// "identity", an .srft style tensor (H x W x C'), or a PPM image passed
/// through extract_style_features.
StyleStats load_style(const std::string &source, int reduced_channels);

/// Style transform of a content map into C decoder channels.
FeatureMap style_map(const Checkpoint &checkpoint, const FeatureMap &content,
                     const StyleStats &stats);

/// Runs the command line (without the program name). Diagnostics go to err.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

}  // namespace fgstyle

#endif  // FGSTYLE_CLI_HPP_
