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

#include "fgstyle/cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "fgstyle/verify.hpp"

namespace fgstyle {

namespace fs = std::filesystem;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage: return kExitUsage;
    case ErrorKind::kFormat:
    case ErrorKind::kIo: return kExitIo;
    default: return kExitDomain;
  }
}

void require_pipeline(const Checkpoint &ck) {
  require(ck.normalization && ck.attention && ck.conv && ck.decoder,
          "checkpoint has no calibrated content transform; run `calibrate` first");
}

FeatureMap render_content(const Checkpoint &ck, const Camera &camera,
                          const SamplingSpec &sampling) {
  require(ck.normalization && ck.attention, "checkpoint has no content transform");
  const PointTransform transform = sict_transform(*ck.normalization, *ck.attention);
  return render_feature_map(ck.field, camera, sampling, &transform);
}

StyleStats load_style(const std::string &source, int reduced_channels) {
  if (source == "identity") return identity_style(reduced_channels);
  const fs::path path(source);
  StyleFeatures features;
  if (path.extension() == ".srft") {
    features = style_from_tensor(load_tensor(path));
    require(features.channels() == reduced_channels,
            "style tensor " + source + " has " + std::to_string(features.channels()) +
                " channels, expected " + std::to_string(reduced_channels));
  } else {
    features = extract_style_features(read_ppm(path), reduced_channels);
  }
  return compute_style_stats(features);
}

FeatureMap style_map(const Checkpoint &ck, const FeatureMap &content,
                     const StyleStats &stats) {
  require(ck.conv.has_value(), "checkpoint has no style conv");
  return apply_dst(content, stats, *ck.conv);
}

namespace {

struct Options {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> samples;
  std::vector<std::string> sets;
  std::string checkpoint;
  std::vector<std::string> styles;
  std::string weights;
  std::string masks;
  std::string split;
  std::optional<int> camera;
};

struct Context {
  const Options &opt;
  std::ostream &out;
  std::ostream &err;
  PipelineConfig config;
  fs::path out_dir;
};

std::vector<std::string> split_list(const std::string &text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) parts.push_back(item);
  return parts;
}

fs::path checkpoint_path(const Context &ctx) {
  return ctx.opt.checkpoint.empty() ? ctx.out_dir / "model.srfg"
                                    : fs::path(ctx.opt.checkpoint);
}

std::vector<Camera> selected_cameras(const Context &ctx, std::vector<int> &ids) {
  const std::vector<Camera> all = ctx.config.cameras.build();
  std::vector<Camera> picked;
  for (int k = 0; k < static_cast<int>(all.size()); ++k) {
    if (ctx.opt.camera && *ctx.opt.camera != k) continue;
    picked.push_back(all[k]);
    ids.push_back(k);
  }
  if (picked.empty())
    throw_error(ErrorKind::kUsage, "--camera " + std::to_string(*ctx.opt.camera) +
                                       " is out of range (" +
                                       std::to_string(all.size()) + " cameras)");
  return picked;
}

std::vector<std::string> style_sources(const Context &ctx) {
  std::vector<std::string> sources;
  for (const std::string &s : ctx.opt.styles)
    for (const std::string &part : split_list(s)) sources.push_back(part);
  if (sources.empty()) sources = ctx.config.styles;
  return sources;
}

void write_image(const Context &ctx, const std::string &stem, int camera,
                 const RgbImage &image) {
  const fs::path path = ctx.out_dir / (stem + "_" + std::to_string(camera) + ".ppm");
  write_ppm(path, image);
  ctx.out << "wrote " << path.string() << '\n';
}

int cmd_synth(Context &ctx) {
  std::vector<int> ids;
  const std::vector<Camera> cams = selected_cameras(ctx, ids);
  const std::vector<TrainingView> views =
      make_training_views(ctx.config.scene, cams, ctx.config.reference_samples,
                          ctx.config.sampling, ctx.config.background);
  for (std::size_t i = 0; i < views.size(); ++i) {
    write_image(ctx, "synth", ids[i], views[i].rgb);
    const fs::path tensor =
        ctx.out_dir / ("synth_" + std::to_string(ids[i]) + "_features.srft");
    save_tensor(tensor, to_tensor(views[i].features));
    ctx.out << "wrote " << tensor.string() << '\n';
  }
  return kExitOk;
}

int cmd_fit(Context &ctx) {
  const std::vector<Camera> cams = ctx.config.cameras.build();
  require(cams.size() >= 2, "fitting needs at least two cameras");
  const auto start = std::chrono::steady_clock::now();
  const std::vector<TrainingView> views =
      make_training_views(ctx.config.scene, cams, ctx.config.reference_samples,
                          ctx.config.sampling, ctx.config.background);
  const Stage1Result result =
      fit_stage1(views, ctx.config.layout, ctx.config.sampling, ctx.config.training);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  Checkpoint ck;
  ck.field = result.field;
  ck.decoder = result.decoder.params;
  save_checkpoint(ctx.out_dir / "model.srfg", ck);

  std::ofstream csv(ctx.out_dir / "loss.csv");
  csv << "iteration,feature_mse,rgb_mse,total\n" << std::setprecision(17);
  for (const LossReport &l : result.curve)
    csv << l.iteration << ',' << l.feature_mse << ',' << l.rgb_mse << ',' << l.total
        << '\n';
  if (!csv) throw_error(ErrorKind::kIo, "cannot write loss.csv");

  ctx.out << "initial feature_mse " << result.initial.feature_mse << " rgb_mse "
          << result.initial.rgb_mse << '\n'
          << "final   feature_mse " << result.final.feature_mse << " rgb_mse "
          << result.final.rgb_mse << '\n'
          << "decoder residual_rms " << result.decoder.residual_rms << " over "
          << result.decoder.pixels_used << " pixels\n"
          << "fit took " << std::fixed << std::setprecision(2) << seconds << " s\n"
          << std::defaultfloat << "wrote " << (ctx.out_dir / "model.srfg").string()
          << '\n';
  return kExitOk;
}

int cmd_calibrate(Context &ctx) {
  Checkpoint ck = load_checkpoint(checkpoint_path(ctx));
  const int c = ck.field.channels();
  const SictConfig &sc = ctx.config.sict;
  require(sc.reduced_channels <= c, "sict.reduced_channels exceeds the field channels");
  ck.normalization =
      calibrate(ck.field.feature, sc.calibration, sc.momentum, sc.epsilon);
  if (!ck.attention || ck.attention->reduced_channels() != sc.reduced_channels)
    ck.attention = AttentionParams::identity(c, sc.reduced_channels);
  if (!ck.conv || ck.conv->reduced_channels() != sc.reduced_channels)
    ck.conv = default_dst_params(c, sc.reduced_channels);

  // The decoder is refit on the content pathway so that `render` reproduces
  // the training images through the same operators `stylize` uses.
  const std::vector<Camera> cams = ctx.config.cameras.build();
  const std::vector<TrainingView> views =
      make_training_views(ctx.config.scene, cams, ctx.config.reference_samples,
                          ctx.config.sampling, ctx.config.background);
  const StyleStats identity = identity_style(sc.reduced_channels);
  std::vector<FeatureMap> maps;
  std::vector<RgbImage> targets;
  for (const TrainingView &v : views) {
    maps.push_back(style_map(ck, render_content(ck, v.camera, ctx.config.sampling),
                             identity));
    targets.push_back(v.rgb);
  }
  const DecoderFit fit = fit_decoder(maps, targets, ctx.config.background);
  ck.decoder = fit.params;
  save_checkpoint(ctx.out_dir / "model.srfg", ck);
  ctx.out << "calibrated " << sc.calibration.points << " points, decoder residual_rms "
          << fit.residual_rms << "\nwrote " << (ctx.out_dir / "model.srfg").string()
          << '\n';
  return kExitOk;
}

// Renders every selected camera through `compose`, which maps the content
// map to the final C-channel feature map.
template <typename Compose>
int render_views(Context &ctx, const std::string &stem, Compose &&compose) {
  const Checkpoint ck = load_checkpoint(checkpoint_path(ctx));
  require_pipeline(ck);
  std::vector<int> ids;
  const std::vector<Camera> cams = selected_cameras(ctx, ids);
  for (std::size_t i = 0; i < cams.size(); ++i) {
    const FeatureMap content = render_content(ck, cams[i], ctx.config.sampling);
    write_image(ctx, stem, ids[i], decode(compose(ck, content), *ck.decoder));
  }
  return kExitOk;
}

std::vector<StyleStats> load_styles(const Context &ctx, int reduced_channels,
                                    std::size_t minimum) {
  const std::vector<std::string> sources = style_sources(ctx);
  if (sources.size() < minimum)
    throw_error(ErrorKind::kUsage, "need at least " + std::to_string(minimum) +
                                       " style(s) via --style or config styles");
  std::vector<StyleStats> stats;
  for (const std::string &s : sources) stats.push_back(load_style(s, reduced_channels));
  return stats;
}

int cmd_render(Context &ctx) {
  return render_views(ctx, "render", [](const Checkpoint &ck, const FeatureMap &m) {
    return style_map(ck, m, identity_style(ck.conv->reduced_channels()));
  });
}

int cmd_stylize(Context &ctx) {
  const int reduced = ctx.config.sict.reduced_channels;
  const StyleStats stats = load_styles(ctx, reduced, 1).front();
  return render_views(ctx, "stylize", [&](const Checkpoint &ck, const FeatureMap &m) {
    return style_map(ck, m, stats);
  });
}

int cmd_interpolate(Context &ctx) {
  const std::vector<StyleStats> stats =
      load_styles(ctx, ctx.config.sict.reduced_channels, 1);
  std::vector<double> weights;
  for (const std::string &w : split_list(ctx.opt.weights)) {
    try {
      std::size_t used = 0;
      weights.push_back(std::stod(w, &used));
      if (used != w.size()) throw std::invalid_argument(w);
    } catch (const std::exception &) {
      throw_error(ErrorKind::kUsage, "--weights entry \"" + w + "\" is not a number");
    }
  }
  if (weights.size() != stats.size())
    throw_error(ErrorKind::kUsage, "--weights needs one value per style (" +
                                       std::to_string(stats.size()) + ")");
  return render_views(ctx, "interpolate", [&](const Checkpoint &ck, const FeatureMap &m) {
    std::vector<FeatureMap> maps;
    for (const StyleStats &s : stats) maps.push_back(style_map(ck, m, s));
    return interpolate_styles(maps, weights);
  });
}

std::vector<Eigen::VectorXd> make_masks(const Context &ctx, std::size_t count, int width,
                                        int height) {
  std::vector<Eigen::VectorXd> masks;
  if (!ctx.opt.split.empty()) {
    if (count != 2) throw_error(ErrorKind::kUsage, "--split needs exactly two styles");
    const bool by_x = ctx.opt.split == "x";
    if (!by_x && ctx.opt.split != "y")
      throw_error(ErrorKind::kUsage, "--split must be x or y");
    Eigen::VectorXd first(Eigen::Index(width) * height);
    for (int v = 0; v < height; ++v)
      for (int u = 0; u < width; ++u)
        first[Eigen::Index(v) * width + u] = (by_x ? 2 * u < width : 2 * v < height);
    masks.push_back(first);
    masks.push_back(1.0 - first.array());
    return masks;
  }
  const std::vector<std::string> paths = split_list(ctx.opt.masks);
  if (paths.size() != count)
    throw_error(ErrorKind::kUsage, "composite needs --split or one --masks image per style");
  for (const std::string &p : paths) {
    const RgbImage image = read_ppm(p);
    if (image.width != width || image.height != height)
      throw_error(ErrorKind::kDomain, "mask " + p + " does not match the camera size");
    masks.push_back(image.pixels.col(0));
  }
  return masks;
}

int cmd_composite(Context &ctx) {
  const std::vector<StyleStats> stats =
      load_styles(ctx, ctx.config.sict.reduced_channels, 1);
  if (ctx.opt.split.empty() && ctx.opt.masks.empty())
    throw_error(ErrorKind::kUsage, "composite needs --masks or --split");
  return render_views(ctx, "composite", [&](const Checkpoint &ck, const FeatureMap &m) {
    std::vector<FeatureMap> maps;
    for (const StyleStats &s : stats) maps.push_back(style_map(ck, m, s));
    return composite_styles(maps, make_masks(ctx, stats.size(), m.width, m.height));
  });
}

int cmd_verify(Context &ctx) {
  const Checkpoint ck = load_checkpoint(checkpoint_path(ctx));
  const std::uint64_t seed = ctx.config.training.seed;
  const int c = ck.field.channels();

  std::vector<PropertyReport> reports;
  reports.push_back(check_equivalence<double>(100, {}, seed, 1e-10));
  reports.push_back(check_equivalence<double>(100, {}, seed + 1, 1e-12, true));
  reports.push_back(check_telescoping(10000, seed));

  VolumeAdaptiveIN state = ck.normalization.value_or(VolumeAdaptiveIN::identity(c));
  const AttentionParams attention = ck.attention.value_or(
      AttentionParams::identity(c, std::min(c, ctx.config.sict.reduced_channels)));
  reports.push_back(check_sampling_invariance(state, attention, 20, 10, seed));
  state.mode = NormMode::kVanilla;
  reports.push_back(check_sampling_invariance(state, attention, 20, 10, seed));

  GradientCheckSpec grad;
  grad.seed = seed;
  reports.push_back(check_gradients(ck.field, ctx.config.cameras.build().front(),
                                    ctx.config.sampling, grad));
  reports.push_back(check_reconstruction(ck.field.feature));
  reports.push_back(check_compactness(64, ck.field.feature.factors.rank, c));

  write_report_text(ctx.out, reports);
  std::ofstream txt(ctx.out_dir / "verify_report.txt");
  write_report_text(txt, reports);
  std::ofstream csv(ctx.out_dir / "verify_report.csv");
  write_report_csv(csv, reports);
  if (!txt || !csv) throw_error(ErrorKind::kIo, "cannot write the verify report");
  return all_pass(reports) ? kExitOk : kExitVerifyFailed;
}

int cmd_info(Context &ctx) {
  const fs::path path = checkpoint_path(ctx);
  const Checkpoint ck = load_checkpoint(path);
  const GridGeometry &g = ck.field.geometry();
  std::ostream &o = ctx.out;
  o << "checkpoint " << path.string() << '\n'
    << "resolution " << g.resolution[0] << " x " << g.resolution[1] << " x "
    << g.resolution[2] << '\n'
    << "bbox [" << g.bbox_min.transpose() << "] .. [" << g.bbox_max.transpose() << "]\n"
    << "feature rank " << ck.field.feature.factors.rank << ", channels "
    << ck.field.channels() << ", density rank " << ck.field.density.factors.rank << '\n'
    << "parameters " << ck.field.feature.parameter_count() + ck.field.density.parameter_count()
    << '\n'
    << "normalization " << (ck.normalization ? "yes" : "no") << ", attention "
    << (ck.attention ? "C'=" + std::to_string(ck.attention->reduced_channels()) : "no")
    << ", style conv " << (ck.conv ? "yes" : "no") << ", decoder "
    << (ck.decoder ? "yes" : "no") << '\n';
  for (const std::string &w : ck.warnings) o << "warning: " << w << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"fgstyle: feature-grid radiance fields with zero-shot style transfer"};
  app.require_subcommand(1);
  Options opt;

  struct Command {
    const char *name;
    const char *help;
    int (*fn)(Context &);
  };
  const Command commands[] = {
      {"synth", "Render reference views of the configured scene", cmd_synth},
      {"fit", "Fit the feature grid to the reference views", cmd_fit},
      {"calibrate", "Estimate volume statistics and refit the decoder", cmd_calibrate},
      {"render", "Render through the content pathway", cmd_render},
      {"stylize", "Render with a reference style", cmd_stylize},
      {"interpolate", "Blend several styles", cmd_interpolate},
      {"composite", "Apply styles under per-pixel masks", cmd_composite},
      {"verify", "Run the property checks", cmd_verify},
      {"info", "Summarize a checkpoint", cmd_info},
  };

  for (const Command &c : commands) {
    CLI::App *sub = app.add_subcommand(c.name, c.help);
    auto *config = sub->add_option("--config", opt.config, "Configuration file")
                       ->check(CLI::ExistingFile);
    if (std::string(c.name) != "info") config->required();
    sub->add_option("--out", opt.out, "Output directory");
    sub->add_option("--seed", opt.seed, "Seed for training, sampling and calibration");
    sub->add_option("--samples", opt.samples, "Samples per ray")
        ->check(CLI::PositiveNumber);
    sub->add_option("--set", opt.sets, "Config override key=value")
        ->expected(1)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    sub->add_option("--checkpoint", opt.checkpoint, "Checkpoint (default OUT/model.srfg)");
    sub->add_option("--camera", opt.camera, "Only this camera index");
    const std::string name = c.name;
    if (name == "stylize" || name == "interpolate" || name == "composite")
      sub->add_option("--style", opt.styles, "Style sources (comma separated)")
          ->expected(1)
          ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    if (name == "interpolate")
      sub->add_option("--weights", opt.weights, "Comma-separated weights")->required();
    if (name == "composite") {
      sub->add_option("--masks", opt.masks, "Comma-separated mask PPMs (red channel)");
      sub->add_option("--split", opt.split, "Two-way split along x or y");
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    CLI::App *sub = app.get_subcommands().front();
    const Command *cmd = nullptr;
    for (const Command &c : commands)
      if (sub->get_name() == c.name) cmd = &c;

    Context ctx{opt, out, err, {}, fs::path(opt.out)};
    std::error_code ec;
    fs::create_directories(ctx.out_dir, ec);
    if (ec) throw_error(ErrorKind::kIo, "cannot create " + opt.out + ": " + ec.message());
    if (!opt.config.empty()) ctx.config = read_config(opt.config, opt.sets);
    if (opt.samples) ctx.config.sampling.samples = *opt.samples;
    if (opt.seed) {
      ctx.config.training.seed = *opt.seed;
      ctx.config.sampling.seed = *opt.seed;
      ctx.config.sict.calibration.seed = *opt.seed;
    }
    return cmd->fn(ctx);
  } catch (const Error &e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::bad_alloc &) {
    err << "error: out of memory\n";
    return kExitDomain;
  }
}

}  // namespace fgstyle
