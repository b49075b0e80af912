#include "bokeh/cli.hpp"

#include <algorithm>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "bokeh/checkpoint.hpp"
#include "bokeh/control.hpp"
#include "bokeh/metrics.hpp"
#include "bokeh/png_io.hpp"
#include "bokeh/render.hpp"
#include "bokeh/service.hpp"
#include "bokeh/synth.hpp"
#include "bokeh/trainer.hpp"

namespace bokeh {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()),
                                                 text.size()));
}

struct RenderArgs {
  std::string input, disparity, out, prompt;
  double focal = 0, intensity = kDefaultIntensity, beta = 6.0;
  bool no_gamma = false;
  int tile = 64, workers = 0;
};

int run_render(const RenderArgs& a, const CLI::App& cmd, std::ostream& out) {
  const ImagePlane aif = load_image(a.input);
  const DisparityMap disp = load_disparity(a.disparity);
  RenderParams p;
  p.occlusion_beta = a.beta;
  p.gamma_aware = !a.no_gamma;
  if (cmd.count("--prompt")) {
    const BokehControl c = parse_prompt(a.prompt);
    p.focal_disparity = resolve_focus(c, disp);
    p.intensity = c.intensity;
  } else {
    p.focal_disparity = a.focal;
    p.intensity = a.intensity;
  }
  if (aif.channels() != 3) throw std::invalid_argument("input image must be RGB");
  const ImagePlane img = render_tiled(aif, disp, p, a.tile, a.workers);
  save_image(img, a.out);
  out << "focal_disparity " << p.focal_disparity << " intensity " << p.intensity << " -> " << a.out
      << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string dataset, path_source = "aif", control = "xattn", loss, out, log;
  std::uint64_t seed = 0;
  int iterations = 3000, batch = 8, decay_step = -1;
  double lr = 1e-3, lr_decayed = 1e-5;
  std::size_t max_train = 0;
};

TrainConfig config_from(const TrainArgs& a) {
  TrainConfig c;
  c.path_source = path_source_from(a.path_source);
  c.control_mode = control_mode_from(a.control);
  c.loss_mode = a.loss.empty()
                    ? (c.path_source == PathSource::Noise ? LossMode::Velocity : LossMode::Residual)
                    : loss_mode_from(a.loss);
  c.seed = a.seed;
  c.iterations = a.iterations;
  c.batch_size = a.batch;
  c.lr_initial = a.lr;
  c.lr_decayed = a.lr_decayed;
  c.decay_step = a.decay_step >= 0 ? a.decay_step : static_cast<int>(0.7 * a.iterations);
  return c;
}

int run_train(const TrainArgs& a, std::ostream& out) {
  const TrainConfig cfg = config_from(a);
  const auto manifest = load_manifest(a.dataset);
  const auto codec = make_codec(cfg.codec);
  const Dataset data = load_dataset(manifest, *codec, a.max_train);
  if (data.train.empty()) throw std::invalid_argument("dataset has no training entries");
  const auto result = train(cfg, data.train, data.latent_height, data.latent_width, data.latent_channels,
                            [&out](const LogRecord& r) {
                              out << "iter " << r.iter << " loss " << r.loss << " lr " << r.lr << "\n";
                            });
  save_checkpoint(a.out, result.net, train_config_to_json(cfg));
  write_text(a.log.empty() ? a.out + ".log.jsonl" : a.log, log_to_jsonl(result.log));
  out << "checkpoint " << a.out << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string pred, gt, report;
  double threshold = EdgeMaskParams{}.threshold;
  int dilate = EdgeMaskParams{}.dilation_radius;
};

std::vector<std::pair<std::string, fs::path>> png_files(const fs::path& p) {
  std::vector<std::pair<std::string, fs::path>> files;
  if (fs::is_regular_file(p)) {
    files.emplace_back(p.filename().string(), p);
    return files;
  }
  if (!fs::is_directory(p)) throw IoError("no such file or directory: " + p.string());
  for (const auto& e : fs::recursive_directory_iterator(p))
    if (e.is_regular_file() && e.path().extension() == ".png")
      files.emplace_back(fs::relative(e.path(), p).generic_string(), e.path());
  std::sort(files.begin(), files.end());
  return files;
}

int run_eval(const EvalArgs& a, std::ostream& out) {
  const EdgeMaskParams mask{a.threshold, a.dilate};
  const SsimParams ssim_params;
  const auto gt = png_files(a.gt);
  const bool single = fs::is_regular_file(a.pred);
  if (gt.empty()) throw IoError("no ground-truth images under " + a.gt);
  json images = json::array();
  std::vector<QualityScores> scores;
  for (const auto& [name, gt_path] : gt) {
    const fs::path pred_path = single ? fs::path(a.pred) : fs::path(a.pred) / name;
    if (!fs::exists(pred_path)) throw IoError("missing prediction " + pred_path.string());
    const auto s = score_pair_lenient(load_image(pred_path), load_image(gt_path), mask, ssim_params);
    json row = scores_to_json(s);
    row["name"] = name;
    images.push_back(row);
    scores.push_back(s);
    if (single) break;
  }
  const ScoreSummary summary = summarize(scores);
  const QualityScores& mean = summary.mean;
  const json report{
      {"edge_mask", {{"threshold", mask.threshold}, {"dilation_radius", mask.dilation_radius}}},
      {"ssim", {{"sigma", ssim_params.sigma}, {"window", 2 * ssim_params.radius + 1}}},
      {"aggregation",
       "per-image scores averaged over the set; edge metrics over images whose ground truth has a "
       "non-empty edge mask (null otherwise)"},
      {"images", images},
      {"edge_images", summary.edge_images},
      {"mean", scores_to_json(mean)}};
  write_text(a.report, report.dump(2) + "\n");
  out << "psnr " << mean.psnr << " ssim " << mean.ssim << " psnr_eg " << mean.psnr_eg << " ssim_eg "
      << mean.ssim_eg << " (" << images.size() << " images)\n";
  return kExitOk;
}

struct AblateArgs {
  std::string dataset, report, checkpoints;
  std::uint64_t seed = 0;
  int iterations = 3000, batch = 8;
  std::size_t max_train = 0;
};

int run_ablate(const AblateArgs& a, std::ostream& out) {
  TrainConfig base;
  base.seed = a.seed;
  base.iterations = a.iterations;
  base.batch_size = a.batch;
  base.decay_step = static_cast<int>(0.7 * a.iterations);
  const auto manifest = load_manifest(a.dataset);
  const auto codec = make_codec(base.codec);
  const Dataset data = load_dataset(manifest, *codec, a.max_train);
  const auto report = run_ablation(base, data, a.checkpoints,
                                   [&out](const std::string& msg) { out << msg << "\n" << std::flush; });
  write_text(a.report, report.to_json({}, {}, data.train.size(), data.eval.size()).dump(2) + "\n");
  out << "report " << a.report << "\n";
  return kExitOk;
}

HttpService* g_service = nullptr;

void handle_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Depth-driven bokeh rendering and flow-matching toolkit", "bokehctl"};
  app.require_subcommand(1);

  RenderArgs ra;
  auto* render = app.add_subcommand("render", "Render synthetic bokeh from an image and disparity map");
  render->add_option("--input", ra.input, "All-in-focus PNG")->required()->check(CLI::ExistingFile);
  render->add_option("--disparity", ra.disparity, "Disparity PNG (16-bit) or PFM")->required()->check(CLI::ExistingFile);
  auto* prompt = render->add_option("--prompt", ra.prompt, "Text control, e.g. \"focus on the foreground\"");
  auto* focal = render->add_option("--focus-disparity", ra.focal, "Focal disparity in [0,1]");
  auto* intensity = render->add_option("--intensity", ra.intensity, "Blur intensity (pixels per unit disparity)");
  prompt->excludes(focal)->excludes(intensity);
  focal->needs(intensity);
  intensity->needs(focal);
  render->add_option("--out", ra.out, "Output PNG")->required();
  render->add_option("--beta", ra.beta, "Occlusion weight exponent");
  render->add_flag("--no-gamma", ra.no_gamma, "Blend in encoded space instead of linear light");
  render->add_option("--tile", ra.tile, "Tile size")->check(CLI::PositiveNumber);
  render->add_option("--workers", ra.workers, "Worker threads (0 = default)");

  SynthOptions so;
  std::string synth_out;
  int size = 64;
  auto* synth = app.add_subcommand("synth", "Synthesize a procedural bokeh dataset");
  synth->add_option("--scenes", so.n_scenes, "Number of scenes")->required()->check(CLI::PositiveNumber);
  synth->add_option("--controls-per-scene", so.controls_per_scene, "Controls per scene")->check(CLI::PositiveNumber);
  synth->add_option("--seed", so.seed, "Seed");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--size", size, "Square canvas size")->check(CLI::Range(16, 1024));
  synth->add_option("--eval-fraction", so.eval_fraction, "Held-out scene fraction")->check(CLI::Range(0.0, 1.0));

  TrainArgs ta;
  auto* trainc = app.add_subcommand("train", "Train the vector-field network");
  trainc->add_option("--dataset", ta.dataset, "manifest.json")->required()->check(CLI::ExistingFile);
  trainc->add_option("--path-source", ta.path_source, "noise | aif")->check(CLI::IsMember({"noise", "aif"}));
  trainc->add_option("--control", ta.control, "xattn | concat")->check(CLI::IsMember({"xattn", "concat"}));
  trainc->add_option("--loss", ta.loss, "velocity | residual (default follows the path source)")
      ->check(CLI::IsMember({"velocity", "residual"}));
  trainc->add_option("--seed", ta.seed, "Seed");
  trainc->add_option("--out", ta.out, "Checkpoint path")->required();
  trainc->add_option("--log", ta.log, "Training log (JSON lines); default <out>.log.jsonl");
  trainc->add_option("--iterations", ta.iterations, "Iterations")->check(CLI::PositiveNumber);
  trainc->add_option("--batch", ta.batch, "Batch size")->check(CLI::PositiveNumber);
  trainc->add_option("--lr", ta.lr, "Initial learning rate")->check(CLI::PositiveNumber);
  trainc->add_option("--lr-decayed", ta.lr_decayed, "Learning rate after the decay step")->check(CLI::PositiveNumber);
  trainc->add_option("--decay-step", ta.decay_step, "Decay step (default 70% of iterations)");
  trainc->add_option("--max-train", ta.max_train, "Use only the first N training entries");

  EvalArgs ea;
  auto* evalc = app.add_subcommand("eval", "Score predictions against ground truth");
  evalc->add_option("--pred", ea.pred, "Prediction PNG or directory")->required();
  evalc->add_option("--gt", ea.gt, "Ground-truth PNG or directory")->required();
  evalc->add_option("--report", ea.report, "Report JSON path")->required();
  evalc->add_option("--edge-threshold", ea.threshold, "Sobel magnitude threshold")->check(CLI::NonNegativeNumber);
  evalc->add_option("--dilate", ea.dilate, "Edge dilation radius in pixels")->check(CLI::NonNegativeNumber);

  AblateArgs aa;
  auto* ablate = app.add_subcommand("ablate", "Train and score the path-source x control-mode grid");
  ablate->add_option("--dataset", aa.dataset, "manifest.json")->required()->check(CLI::ExistingFile);
  ablate->add_option("--report", aa.report, "Report JSON path")->required();
  ablate->add_option("--checkpoints", aa.checkpoints, "Directory for per-arm checkpoints");
  ablate->add_option("--seed", aa.seed, "Seed");
  ablate->add_option("--iterations", aa.iterations, "Iterations per arm")->check(CLI::PositiveNumber);
  ablate->add_option("--batch", aa.batch, "Batch size")->check(CLI::PositiveNumber);
  ablate->add_option("--max-train", aa.max_train, "Use only the first N training entries");

  ServiceConfig sc;
  std::string store = "store";
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  serve->add_option("--port", sc.port, "Port (0 = any free port)")->check(CLI::Range(0, 65535));
  serve->add_option("--store", store, "Image store directory");
  serve->add_option("--host", sc.host, "Bind address");
  serve->add_option("--max-upload", sc.max_upload_bytes, "Maximum upload size in bytes")->check(CLI::PositiveNumber);
  serve->add_option("--render-timeout-ms", sc.render_timeout_ms, "Render queue timeout")->check(CLI::PositiveNumber);
  serve->add_option("--max-renders", sc.max_concurrent_renders, "Concurrent renders")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    return kExitUsage;
  }

  if (*render && !render->count("--prompt") && !render->count("--focus-disparity")) {
    err << "render: one of --prompt or --focus-disparity/--intensity is required\n" << render->help();
    return kExitUsage;
  }

  try {
    if (*render) return run_render(ra, *render, out);
    if (*synth) {
      so.out_dir = synth_out;
      so.width = so.height = size;
      const auto m = synthesize(so);
      out << m.entries.size() << " entries -> " << (so.out_dir / "manifest.json").string() << "\n";
      return kExitOk;
    }
    if (*trainc) return run_train(ta, out);
    if (*evalc) return run_eval(ea, out);
    if (*ablate) return run_ablate(aa, out);
    if (*serve) {
      sc.store_dir = store;
      HttpService service(sc);
      const int port = service.bind();
      out << "listening on http://" << sc.host << ":" << port << "\n" << std::flush;
      g_service = &service;
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      service.run();
      g_service = nullptr;
      return kExitOk;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace bokeh
