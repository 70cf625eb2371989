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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "fgstyle/cli.hpp"
#include "fgstyle/io.hpp"
#include "fgstyle/trainer.hpp"
#include "fgstyle/verify.hpp"

namespace fs = std::filesystem;
using namespace fgstyle;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string &title, const std::function<Outcome()> &body) {
  Outcome o;
  try {
    o = body();
  } catch (const std::exception &e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << title << ": "
            << o.detail << std::endl;
}

std::string sci(double v) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(3) << v;
  return s.str();
}

// Shared stage-1 setup: sphere scene, 32^3 grid, R = 8, C = 16, four 64 x 64
// cameras.
struct SphereSetup {
  SceneOracle scene = sphere_scene(16);
  FieldLayout layout;
  SamplingSpec sampling;
  std::vector<Camera> cameras;
  std::vector<TrainingView> views;

  SphereSetup() {
    layout.geometry.resolution = {32, 32, 32};
    layout.geometry.bbox_min = Eigen::Vector3d::Constant(-1.5);
    layout.geometry.bbox_max = Eigen::Vector3d::Constant(1.5);
    layout.rank = 8;
    layout.channels = 16;
    sampling.samples = 48;
    sampling.near = 2.5;
    sampling.far = 5.5;
    cameras = orbit_cameras(4, 4.0, 20.0, Eigen::Vector3d::Zero(), 64, 64, 40.0);
    views = make_training_views(scene, cameras, 512, sampling, Eigen::Vector3d::Ones());
  }
};

bool same_field(const RadianceField &a, const RadianceField &b) {
  for (int k = 0; k < 3; ++k) {
    if (a.feature.factors.lines[k] != b.feature.factors.lines[k] ||
        a.feature.factors.planes[k] != b.feature.factors.planes[k] ||
        a.density.factors.lines[k] != b.density.factors.lines[k] ||
        a.density.factors.planes[k] != b.density.factors.planes[k])
      return false;
  }
  return a.feature.basis == b.feature.basis;
}

bool same_curve(const std::vector<LossReport> &a, const std::vector<LossReport> &b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].feature_mse != b[i].feature_mse || a[i].rgb_mse != b[i].rgb_mse ||
        a[i].total != b[i].total)
      return false;
  return true;
}

int cli(const std::vector<std::string> &args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  if (code != 0) std::cerr << "cli " << args.front() << " exited " << code << ": " << err.str();
  return code;
}

}  // namespace

int main() {
  std::cout << std::unitbuf;
  const fs::path work =
      fs::temp_directory_path() / ("fgstyle_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(work);

  criterion(1, "deferred style transform equals per-point styling", [] {
    ::setenv("STYLERF_THREADS", "1", 1);
    const auto start = Clock::now();
    const PropertyReport r = check_equivalence<double>(100, EquivalenceDims{}, 1, 1e-10);
    const double t = seconds_since(start);
    ::unsetenv("STYLERF_THREADS");
    return Outcome{r.pass && r.instances == 100 && t < 10.0,
                   "100 instances, max abs diff " + sci(r.max_error) +
                       " (tol 1e-10), " + sci(t) + " s (limit 10 s)"};
  });

  criterion(2, "content transform is independent of batch composition", [] {
    Rng rng(2);
    VolumeAdaptiveIN state = VolumeAdaptiveIN::identity(16);
    state.running_mean = rng.matrix(16, 1, -1.0, 1.0);
    state.running_var = rng.matrix(16, 1, 0.2, 2.0);
    AttentionParams params{rng.matrix(8, 16, -0.5, 0.5), rng.matrix(8, 16, -0.5, 0.5),
                           rng.matrix(8, 16, -0.5, 0.5)};
    const PropertyReport eval = check_sampling_invariance(state, params, 20, 10, 7);
    state.mode = NormMode::kVanilla;
    const PropertyReport vanilla = check_sampling_invariance(state, params, 20, 10, 7);
    return Outcome{eval.pass && eval.max_error == 0.0 && vanilla.pass,
                   "eval-mode max diff " + sci(eval.max_error) + " over " +
                       std::to_string(eval.instances) + " batches (bitwise required); " +
                       "vanilla max diff " + sci(vanilla.max_error) + " (needs > 1e-3)"};
  });

  criterion(3, "ray weights telescope", [] {
    const PropertyReport r = check_telescoping(10000, 3, 1e-6);
    Eigen::VectorXd sigma(2), delta(2);
    sigma << std::log(2.0), std::log(2.0);
    delta << 1.0, 1.0;
    const RayWeights w = compute_weights(sigma, delta);
    const double worked =
        std::max(std::abs(w.weights[0] - 0.5), std::abs(w.weights[1] - 0.25));
    return Outcome{r.pass && worked <= 1e-9,
                   "10^4 rays max |sum w - (1 - T)| " + sci(r.max_error) +
                       " (tol 1e-6); worked case error " + sci(worked) + " (tol 1e-9)"};
  });

  criterion(4, "analytic gradients match central differences", [] {
    FieldLayout layout;
    layout.geometry.resolution = {12, 10, 11};
    layout.geometry.bbox_min = Eigen::Vector3d::Constant(-1.5);
    layout.geometry.bbox_max = Eigen::Vector3d::Constant(1.5);
    layout.rank = 4;
    layout.channels = 6;
    RadianceField field = initialize_field(layout, 4);
    // Thicker density than the fog start so the transmittance chain matters.
    field.density.factors.planes[0].array() += 0.4;
    const Camera cam = Camera::look_at({3.5, 1.0, 1.2}, Eigen::Vector3d::Zero(),
                                       Eigen::Vector3d::UnitZ(), 16, 16, 45.0);
    SamplingSpec sampling;
    sampling.samples = 40;
    sampling.near = 2.0;
    sampling.far = 5.5;
    GradientCheckSpec spec;
    spec.per_group = 24;
    spec.rays = 64;
    spec.seed = 4;
    const PropertyReport r = check_gradients(field, cam, sampling, spec);
    return Outcome{r.pass && r.instances >= 100,
                   std::to_string(r.instances) +
                       " parameters over 5 groups, max rel err " + sci(r.max_error) +
                       " (tol 1e-4, h 1e-4)"};
  });

  // Criteria 5, 7 and 8 share the fitted sphere model.
  Checkpoint fitted;
  bool have_fit = false;
  criterion(5, "stage-1 fit of the sphere scene", [&] {
    ::setenv("STYLERF_THREADS", "1", 1);
    SphereSetup setup;
    Stage1Config config;
    config.seed = 5;
    auto start = Clock::now();
    const Stage1Result a = fit_stage1(setup.views, setup.layout, setup.sampling, config);
    const double t = seconds_since(start);
    const Stage1Result b = fit_stage1(setup.views, setup.layout, setup.sampling, config);
    ::unsetenv("STYLERF_THREADS");
    const bool identical = same_field(a.field, b.field) && same_curve(a.curve, b.curve) &&
                           a.final.total == b.final.total;
    const double ratio = a.final.feature_mse / a.initial.feature_mse;
    fitted.field = a.field;
    fitted.decoder = a.decoder.params;
    have_fit = true;
    return Outcome{ratio <= 0.01 && t < 60.0 && identical,
                   "feature MSE " + sci(a.initial.feature_mse) + " -> " +
                       sci(a.final.feature_mse) + " (ratio " + sci(ratio) +
                       ", limit 1e-2), 2000 iterations in " + sci(t) +
                       " s single-threaded (limit 60 s), repeat run " +
                       (identical ? "bit-identical" : "DIFFERS")};
  });

  criterion(6, "VM reconstruction and compactness", [] {
    GridGeometry g;
    g.resolution = {20, 17, 23};
    const VMFeatureField field = [&] {
      VMFeatureField f = VMFeatureField::zeros(g, 8, 16);
      Rng rng(6);
      for (int a = 0; a < 3; ++a) {
        f.factors.lines[a] = rng.matrix(8, f.factors.lines[a].cols(), -1.0, 1.0);
        f.factors.planes[a] = rng.matrix(8, f.factors.planes[a].cols(), -1.0, 1.0);
      }
      f.basis = rng.matrix(16, 24, -1.0, 1.0);
      return f;
    }();
    const PropertyReport r = check_reconstruction(field, 1e-6);
    const PropertyReport c = check_compactness(64, 8, 16);
    return Outcome{r.pass && c.pass,
                   "max node error " + sci(r.max_error) + " over " +
                       std::to_string(r.instances) +
                       " nodes (tol 1e-6); parameters / dense at n=64, C=16 = " +
                       sci(c.max_error)};
  });

  // Pipeline directory for the CLI criteria.
  const fs::path pipe = work / "pipeline";
  const fs::path config = pipe / "sphere.json";
  auto prepare_pipeline = [&]() -> bool {
    if (!have_fit) return false;
    fs::create_directories(pipe);
    std::ofstream(config) << R"({
  "scene": { "channels": 16, "primitives": [ { "shape": "sphere" } ] },
  "grid": { "resolution": [32, 32, 32], "rank": 8 },
  "cameras": { "count": 4, "radius": 4, "elevation_deg": 20,
               "width": 64, "height": 64, "fov_deg": 40 },
  "sampling": { "samples": 48, "near": 2.5, "far": 5.5 },
  "sict": { "reduced_channels": 8, "calibration_points": 16384 },
  "styles": ["identity"]
})";
    // A striped colour image as the second style.
    RgbImage stripes(48, 40);
    for (int v = 0; v < 40; ++v)
      for (int u = 0; u < 48; ++u)
        stripes.pixels.row(Eigen::Index(v) * 48 + u)
            << 0.5 + 0.5 * std::sin(0.6 * u), 0.5 + 0.4 * std::cos(0.3 * v + 0.2 * u),
            (u / 6 + v / 6) % 2 ? 0.9 : 0.2;
    write_ppm(pipe / "stripes.ppm", stripes);
    save_checkpoint(pipe / "model.srfg", fitted);
    return cli({"calibrate", "--config", config.string(), "--out", pipe.string()}) == 0;
  };
  const bool pipeline_ready = prepare_pipeline();

  criterion(7, "identity style reproduces render output", [&] {
    if (!pipeline_ready) return Outcome{false, "pipeline setup failed"};
    const fs::path r = pipe / "render", s = pipe / "stylize";
    const std::string ck = (pipe / "model.srfg").string();
    if (cli({"render", "--config", config.string(), "--out", r.string(), "--checkpoint", ck}) ||
        cli({"stylize", "--config", config.string(), "--out", s.string(), "--checkpoint", ck,
             "--style", "identity"}))
      return Outcome{false, "cli failed"};
    int equal = 0;
    for (int k = 0; k < 4; ++k)
      equal += read_file(r / ("render_" + std::to_string(k) + ".ppm")) ==
               read_file(s / ("stylize_" + std::to_string(k) + ".ppm"));
    return Outcome{equal == 4, std::to_string(equal) + "/4 views byte-identical"};
  });

  criterion(8, "interpolation and composition identities", [&] {
    if (!pipeline_ready) return Outcome{false, "pipeline setup failed"};
    const std::string ck = (pipe / "model.srfg").string();
    const std::string stripes = (pipe / "stripes.ppm").string();
    const std::string cfg = config.string();
    const fs::path a = pipe / "style_a", b = pipe / "style_b", in = pipe / "interp",
                   ones = pipe / "ones", half = pipe / "half";
    RgbImage white(64, 64), black(64, 64);
    white.pixels.setOnes();
    write_ppm(pipe / "mask_one.ppm", white);
    write_ppm(pipe / "mask_zero.ppm", black);
    const std::vector<std::string> common{"--config", cfg, "--checkpoint", ck, "--camera", "1"};
    auto with = [&](std::vector<std::string> head, std::vector<std::string> tail) {
      head.insert(head.end(), common.begin(), common.end());
      head.insert(head.end(), tail.begin(), tail.end());
      return cli(head);
    };
    if (with({"stylize"}, {"--out", a.string(), "--style", stripes}) ||
        with({"stylize"}, {"--out", b.string(), "--style", "identity"}) ||
        with({"interpolate"}, {"--out", in.string(), "--style", stripes + ",identity",
                               "--weights", "1,0"}) ||
        with({"composite"}, {"--out", ones.string(), "--style", stripes + ",identity",
                             "--masks", (pipe / "mask_one.ppm").string() + "," +
                                            (pipe / "mask_zero.ppm").string()}) ||
        with({"composite"}, {"--out", half.string(), "--style", stripes + ",identity",
                             "--split", "x"}))
      return Outcome{false, "cli failed"};

    const bool interp = read_file(in / "interpolate_1.ppm") == read_file(a / "stylize_1.ppm");
    const bool mask = read_file(ones / "composite_1.ppm") == read_file(a / "stylize_1.ppm");
    const RgbImage ia = read_ppm(a / "stylize_1.ppm"), ib = read_ppm(b / "stylize_1.ppm"),
                   ih = read_ppm(half / "composite_1.ppm");
    int mismatched = 0;
    for (int v = 0; v < 64; ++v)
      for (int u = 0; u < 64; ++u) {
        const Eigen::Index p = Eigen::Index(v) * 64 + u;
        const RgbImage &src = u < 32 ? ia : ib;
        mismatched += ih.pixels.row(p) != src.pixels.row(p);
      }
    const bool differ = ia.pixels != ib.pixels;
    return Outcome{interp && mask && mismatched == 0 && differ,
                   std::string("weights (1,0) ") + (interp ? "identical" : "DIFFER") +
                       "; all-ones mask " + (mask ? "identical" : "DIFFERS") +
                       "; half/half splice mismatched pixels " + std::to_string(mismatched) +
                       (differ ? "" : " (styles coincide, splice untested)")};
  });

  criterion(9, "checkpoint round trip and corrupt inputs", [&] {
    Checkpoint ck;
    FieldLayout layout;
    layout.geometry.resolution = {9, 7, 8};
    layout.rank = 3;
    layout.channels = 5;
    ck.field = initialize_field(layout, 9);
    ck.normalization = VolumeAdaptiveIN::identity(5);
    ck.attention = AttentionParams::identity(5, 4);
    ck.conv = default_dst_params(5, 4);
    ck.decoder = DecoderParams::zeros(5);
    const fs::path p1 = work / "a.srfg", p2 = work / "b.srfg";
    save_checkpoint(p1, ck);
    save_checkpoint(p2, load_checkpoint(p1));
    const std::vector<std::uint8_t> bytes = read_file(p1);
    const bool identical = bytes == read_file(p2);

    // Section table of the valid file: offset of the tag, tag, payload length.
    struct Section {
      std::size_t offset;
      std::uint32_t tag;
      std::size_t length;
    };
    std::vector<Section> sections;
    for (std::size_t pos = 8; pos < bytes.size();) {
      std::uint32_t tag = 0;
      std::uint64_t len = 0;
      for (int k = 0; k < 4; ++k) tag |= std::uint32_t(bytes[pos + k]) << (8 * k);
      for (int k = 0; k < 8; ++k) len |= std::uint64_t(bytes[pos + 4 + k]) << (8 * k);
      sections.push_back({pos, tag, std::size_t(len)});
      pos += 12 + len;
    }
    auto put_u32 = [](std::vector<std::uint8_t> &b, std::size_t at, std::uint32_t v) {
      for (int k = 0; k < 4; ++k) b[at + k] = std::uint8_t(v >> (8 * k));
    };
    auto get_u32 = [](const std::vector<std::uint8_t> &b, std::size_t at) {
      std::uint32_t v = 0;
      for (int k = 0; k < 4; ++k) v |= std::uint32_t(b[at + k]) << (8 * k);
      return v;
    };

    // Every mutation below is structurally invalid by construction.
    Rng rng(99);
    int typed = 0, other = 0;
    for (int i = 0; i < 50; ++i) {
      std::vector<std::uint8_t> bad = bytes;
      const Section &sec = sections[rng.below(sections.size())];
      const std::size_t payload = sec.offset + 12;
      switch (i % 8) {
        case 0: {  // truncated inside a section header or payload
          const std::size_t cut = sec.offset + 1 + rng.below(11 + sec.length);
          bad.resize(cut);
          break;
        }
        case 1:
          bad[rng.below(4)] ^= std::uint8_t(1 + rng.below(255));
          break;
        case 2:
          put_u32(bad, 4, 2 + std::uint32_t(rng.below(1000)));
          break;
        case 3: {  // section length off by a nonzero amount
          const std::uint64_t len = sec.length + 1 + rng.below(64);
          const std::uint64_t shorter = sec.length - 1 - rng.below(std::min<std::size_t>(sec.length, 64));
          const std::uint64_t v = rng.below(2) ? len : shorter;
          for (int k = 0; k < 8; ++k) bad[sec.offset + 4 + k] = std::uint8_t(v >> (8 * k));
          break;
        }
        case 4: {  // a leading dimension field of a sized section
          std::vector<std::size_t> fields;
          for (const Section &s : sections) {
            const std::size_t p = s.offset + 12;
            if (s.tag == kTagGeometry) fields.insert(fields.end(), {p, p + 4, p + 8});
            if (s.tag == kTagFeatureFactors) fields.insert(fields.end(), {p, p + 4});
            if (s.tag == kTagDensityFactors || s.tag == kTagDecoder) fields.push_back(p);
            if (s.tag == kTagBasis || s.tag == kTagAttention || s.tag == kTagStyleConv)
              fields.insert(fields.end(), {p, p + 4});
          }
          const std::size_t at = fields[rng.below(fields.size())];
          put_u32(bad, at, get_u32(bad, at) + 1 + std::uint32_t(rng.below(5)));
          break;
        }
        case 5: {  // non-finite value in a float payload (skip leading u32 fields)
          const std::size_t skip = sec.tag == kTagGeometry ? 12
                                   : sec.tag == kTagFeatureFactors || sec.tag == kTagBasis ||
                                           sec.tag == kTagAttention || sec.tag == kTagStyleConv
                                       ? 8
                                   : sec.tag == kTagNormalization ? 0
                                                                  : 4;
          const std::size_t slots = (sec.length - skip) / 4;
          put_u32(bad, payload + skip + 4 * rng.below(slots),
                  rng.below(2) ? 0x7fc00000u : 0xff800000u);
          break;
        }
        case 6: {  // a required section removed
          const Section &req = sections[rng.below(4)];
          bad.erase(bad.begin() + std::ptrdiff_t(req.offset),
                    bad.begin() + std::ptrdiff_t(req.offset + 12 + req.length));
          break;
        }
        default:  // a section repeated
          bad.insert(bad.end(), bytes.begin() + std::ptrdiff_t(sec.offset),
                     bytes.begin() + std::ptrdiff_t(sec.offset + 12 + sec.length));
          break;
      }
      try {
        decode_checkpoint(bad);
        ++other;
      } catch (const FormatError &) {
        ++typed;
      } catch (...) {
        ++other;
      }
    }

    // Arbitrary mutations may or may not stay valid, but must never escape
    // as anything other than a FormatError.
    int untyped = 0;
    for (int i = 0; i < 2000; ++i) {
      std::vector<std::uint8_t> bad = bytes;
      const int flips = 1 + int(rng.below(6));
      for (int k = 0; k < flips; ++k) bad[rng.below(bad.size())] = std::uint8_t(rng.below(256));
      if (rng.below(4) == 0) bad.resize(rng.below(bad.size()));
      try {
        decode_checkpoint(bad);
      } catch (const FormatError &) {
      } catch (...) {
        ++untyped;
      }
    }
    return Outcome{identical && typed == 50 && untyped == 0,
                   std::string("save-load-save ") + (identical ? "byte-identical" : "DIFFERS") +
                       "; corrupt checkpoints with typed errors " + std::to_string(typed) +
                       "/50; random mutations escaping untyped " + std::to_string(untyped) +
                       "/2000"};
  });

  criterion(10, "reference quadrature converges", [] {
    const SceneOracle scene = sphere_scene(16);
    const Camera cam = Camera::look_at({4.0, 0.0, 1.2}, Eigen::Vector3d::Zero(),
                                       Eigen::Vector3d::UnitZ(), 64, 64, 40.0);
    SamplingSpec spec;
    spec.near = 2.0;
    spec.far = 6.0;
    spec.samples = 1024;
    const ReferenceView lo = reference_render(scene, cam, spec);
    spec.samples = 4096;
    const ReferenceView hi = reference_render(scene, cam, spec);
    const double df = (lo.features.data - hi.features.data).cwiseAbs().maxCoeff();
    const double dw = (lo.features.ray_weight - hi.features.ray_weight).cwiseAbs().maxCoeff();
    const double dc = (lo.rgb.pixels - hi.rgb.pixels).cwiseAbs().maxCoeff();
    const double worst = std::max({df, dw, dc});
    return Outcome{worst <= 1e-3, "max abs diff features " + sci(df) + ", ray weight " +
                                      sci(dw) + ", rgb " + sci(dc) + " (tol 1e-3)"};
  });

  std::error_code ec;
  fs::remove_all(work, ec);
  std::cout << (failures == 0 ? "ALL CRITERIA PASS" : std::to_string(failures) + " FAILED")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
