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

// Reusable property checks shared by the `verify` subcommand and the tests.
// Every check is a deterministic function of its seed.

#ifndef FGSTYLE_VERIFY_HPP_
#define FGSTYLE_VERIFY_HPP_

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "fgstyle/grid.hpp"
#include "fgstyle/render.hpp"
#include "fgstyle/sict.hpp"

namespace fgstyle {

/// How max_error is compared with tolerance.
enum class Bound {
  kAtMost,  // pass iff max_error <= tolerance
  kBelow,   // pass iff max_error < tolerance
  kAbove,   // pass iff max_error > tolerance (counterexample searches)
};

struct PropertyReport {
  std::string name;
  std::size_t instances = 0;
  double max_error = 0.0;
  double tolerance = 0.0;
  Bound bound = Bound::kAtMost;
  bool pass = false;

  /// Recomputes `pass` from the other fields.
  void finalize();
};

struct EquivalenceDims {
  int max_samples = 32;
  int max_reduced_channels = 8;
  int max_channels = 16;
  int max_height = 16;
  int max_width = 16;
};

/// Random rays with weights from random densities, random points, T from a
/// random covariance, random conv, mu and sigma. Compares the deferred map
/// transform against per-point styling integrated along each ray, both
/// computed in Scalar. Instantiated for float and double.
template <typename Scalar>
PropertyReport check_equivalence(int trials, const EquivalenceDims &dims,
                                 std::uint64_t seed, double tolerance,
                                 bool zero_mu = false);

/// Pushes each probe point through apply_sict alone and inside `variants`
/// random batches (plus one permuted batch in eval mode) and reports the
/// largest deviation of the probe's output. Eval mode must be exact; in
/// vanilla mode the report instead passes when some deviation exceeds 1e-3.
/// Train mode is a contract error.
PropertyReport check_sampling_invariance(const VolumeAdaptiveIN &state,
                                         const AttentionParams &params, int probes,
                                         int variants, std::uint64_t seed);

/// |sum w_i - (1 - exp(-sum sigma_i delta_i))| over random rays.
PropertyReport check_telescoping(int rays, std::uint64_t seed, double tolerance = 1e-6);

struct GradientCheckSpec {
  int per_group = 25;  // five groups, so 125 parameters by default
  double step = 1e-4;
  double tolerance = 1e-4;
  int rays = 48;
  std::uint64_t seed = 0;
};

/// Analytic stage-1 gradients against central differences on a random
/// loss (random target maps and readout) over rays of `camera`. Parameters
/// are drawn from entries with |gradient| > 1e-6 in each of: feature lines,
/// feature planes, basis, density lines, density planes; a group with fewer
/// eligible entries than per_group is checked in full. Error is
/// |a - d| / max(|a|, |d|).
PropertyReport check_gradients(const RadianceField &field, const Camera &camera,
                               const SamplingSpec &sampling,
                               const GradientCheckSpec &spec);

/// reconstruct_dense against a direct triple loop over nodes.
PropertyReport check_reconstruction(const VMFeatureField &field, double tolerance = 1e-6);

/// Ratio of VM parameters to dense n^3 * C entries for an n^3 grid; passes
/// when strictly below 1.
PropertyReport check_compactness(int resolution, int rank, int channels);

bool all_pass(const std::vector<PropertyReport> &reports);

/// One line per report: PASS|FAIL name instances=.. max_error=.. tolerance=..
void write_report_text(std::ostream &out, const std::vector<PropertyReport> &reports);
/// Header: property,instances,max_error,tolerance,bound,pass
void write_report_csv(std::ostream &out, const std::vector<PropertyReport> &reports);

}  // namespace fgstyle

#endif  // FGSTYLE_VERIFY_HPP_
