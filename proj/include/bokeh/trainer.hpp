#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "bokeh/codec.hpp"
#include "bokeh/flow.hpp"
#include "bokeh/metrics.hpp"
#include "bokeh/net.hpp"
#include "bokeh/synth.hpp"

namespace bokeh {

struct TrainConfig {
  PathSource path_source = PathSource::AllInFocus;
  LossMode loss_mode = LossMode::Residual;
  ControlMode control_mode = ControlMode::CrossAttention;
  std::uint64_t seed = 0;
  int batch_size = 8;
  int iterations = 3000;
  double lr_initial = 1e-3;
  double lr_decayed = 1e-5;
  int decay_step = 2100;  // first iteration that uses lr_decayed
  std::string codec = "identity";
  std::vector<int> eval_steps{1, 2, 4};
  int log_every = 50;

  int patch_size = 8;
  int embed_dim = 64;
  int mlp_hidden = 128;
  int token_hidden = 64;
  int n_blocks = 2;
  int time_dim = 16;
  int control_dim = 16;

  void validate() const;
  double lr_at(int iteration) const { return iteration < decay_step ? lr_initial : lr_decayed; }
  NetConfig net_config(int latent_height, int latent_width, int latent_channels) const;
};

nlohmann::json train_config_to_json(const TrainConfig& c);

std::string to_string(PathSource s);
std::string to_string(LossMode m);
std::string to_string(ControlMode m);
PathSource path_source_from(const std::string& s);   // "noise" | "aif"
LossMode loss_mode_from(const std::string& s);       // "velocity" | "residual"
ControlMode control_mode_from(const std::string& s); // "xattn" | "concat"

/// Control seen by the network for a resolved focal disparity and intensity.
/// Both control modes receive exactly these two numbers.
Conditioning make_conditioning(double focal_disparity, double intensity, int control_dim);

struct Example {
  std::string scene_id;
  Latent aif;
  Latent bokeh;
  ImagePlane bokeh_image;  // ground truth as stored
  double focal_disparity = 0;
  double intensity = 0;
};

struct Dataset {
  std::vector<Example> train;
  std::vector<Example> eval;
  int latent_height = 0;
  int latent_width = 0;
  int latent_channels = 0;
};

/// Loads and encodes every manifest entry. `max_train` > 0 truncates the
/// training split (first entries in manifest order).
Dataset load_dataset(const DatasetManifest& manifest, const LatentCodec& codec,
                     std::size_t max_train = 0);

struct LogRecord {
  int iter = 0;
  double loss = 0;
  double lr = 0;
  double wall_ms = 0;
};

struct TrainResult {
  VectorFieldNet net;
  std::vector<LogRecord> log;
  double final_loss = 0;
  double wall_ms = 0;
};

/// Called after each logged record; may be empty.
using LogSink = std::function<void(const LogRecord&)>;

/// Seeded Adam loop over `examples`. Throws on an empty set or a
/// non-finite loss.
TrainResult train(const TrainConfig& config, const std::vector<Example>& examples,
                  int latent_height, int latent_width, int latent_channels,
                  const LogSink& sink = {});

/// Starting latent for sampling: z_A, or seeded N(0,1) noise.
Latent sampling_start(PathSource source, const Latent& aif, std::uint64_t seed);

/// One sample from the trained field.
Latent sample(const VectorFieldNet& net, const TrainConfig& config, const Example& ex, int steps,
              std::uint64_t noise_seed);

struct StepScores {
  int steps = 0;
  ScoreSummary summary;
  const QualityScores& mean() const { return summary.mean; }
};

/// Per-image scores averaged over the set, for each configured step count.
std::vector<StepScores> evaluate(const VectorFieldNet& net, const TrainConfig& config,
                                 const std::vector<Example>& examples, const LatentCodec& codec,
                                 const EdgeMaskParams& mask = {}, const SsimParams& ssim = {});

/// Undefined (NaN) metrics serialize as null.
nlohmann::json scores_to_json(const QualityScores& s);

/// Log as JSON lines {iter, loss, lr, wall_ms}.
std::string log_to_jsonl(const std::vector<LogRecord>& log);

struct ArmReport {
  std::string name;
  TrainConfig config;
  std::vector<StepScores> scores;
  double final_loss = 0;
  double wall_s = 0;
};

struct AblationReport {
  std::vector<ArmReport> arms;
  nlohmann::json to_json(const EdgeMaskParams& mask, const SsimParams& ssim,
                         std::size_t n_train, std::size_t n_eval) const;
  const ArmReport& arm(PathSource source, ControlMode mode) const;
};

/// Trains and evaluates the 2x2 grid {noise, aif} x {xattn, concat} with a
/// shared seed and budget. The noise arms use the velocity loss, the aif
/// arms the residual loss. Checkpoints go to `out_dir` when it is non-empty.
AblationReport run_ablation(const TrainConfig& base, const Dataset& data,
                            const std::filesystem::path& out_dir = {},
                            const std::function<void(const std::string&)>& progress = {});

}  // namespace bokeh
