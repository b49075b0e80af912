#include "bokeh/trainer.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include "bokeh/adam.hpp"
#include "bokeh/checkpoint.hpp"
#include "bokeh/png_io.hpp"
#include "bokeh/rng.hpp"

namespace bokeh {

void TrainConfig::validate() const {
  if (iterations <= 0) throw std::invalid_argument("iterations must be positive");
  if (batch_size <= 0) throw std::invalid_argument("batch size must be positive");
  if (!(lr_initial > 0) || !(lr_decayed > 0)) throw std::invalid_argument("learning rates must be positive");
  if (decay_step < 0) throw std::invalid_argument("decay step must be >= 0");
  if (log_every <= 0) throw std::invalid_argument("log interval must be positive");
  for (int s : eval_steps)
    if (s <= 0) throw std::invalid_argument("eval step counts must be positive");
}

NetConfig TrainConfig::net_config(int lh, int lw, int lc) const {
  NetConfig n;
  n.latent_height = lh;
  n.latent_width = lw;
  n.latent_channels = lc;
  n.patch_size = patch_size;
  n.embed_dim = embed_dim;
  n.mlp_hidden = mlp_hidden;
  n.token_hidden = token_hidden;
  n.n_blocks = n_blocks;
  n.time_dim = time_dim;
  n.control_dim = control_dim;
  n.control_mode = control_mode;
  n.validate();
  return n;
}

std::string to_string(PathSource s) { return s == PathSource::Noise ? "noise" : "aif"; }
std::string to_string(LossMode m) { return m == LossMode::Velocity ? "velocity" : "residual"; }
std::string to_string(ControlMode m) {
  return m == ControlMode::CrossAttention ? "xattn" : "concat";
}

PathSource path_source_from(const std::string& s) {
  if (s == "noise") return PathSource::Noise;
  if (s == "aif") return PathSource::AllInFocus;
  throw std::invalid_argument("unknown path source '" + s + "'");
}

LossMode loss_mode_from(const std::string& s) {
  if (s == "velocity") return LossMode::Velocity;
  if (s == "residual") return LossMode::Residual;
  throw std::invalid_argument("unknown loss mode '" + s + "'");
}

ControlMode control_mode_from(const std::string& s) {
  if (s == "xattn") return ControlMode::CrossAttention;
  if (s == "concat") return ControlMode::Concatenation;
  throw std::invalid_argument("unknown control mode '" + s + "'");
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"path_source", to_string(c.path_source)},
          {"loss", to_string(c.loss_mode)},
          {"control", to_string(c.control_mode)},
          {"seed", c.seed},
          {"batch_size", c.batch_size},
          {"iterations", c.iterations},
          {"lr", {{"initial", c.lr_initial}, {"decayed", c.lr_decayed}, {"decay_step", c.decay_step}}},
          {"codec", c.codec},
          {"eval_steps", c.eval_steps},
          {"net",
           {{"patch", c.patch_size},
            {"embed_dim", c.embed_dim},
            {"mlp_hidden", c.mlp_hidden},
            {"token_hidden", c.token_hidden},
            {"blocks", c.n_blocks},
            {"time_dim", c.time_dim},
            {"control_dim", c.control_dim}}}};
}

Conditioning make_conditioning(double focal_disparity, double intensity, int control_dim) {
  BokehControl c;
  c.focus = FocusRegion::AtDisparity;
  c.disparity = focal_disparity;
  c.intensity = intensity;
  return Conditioning{embed_control(c, control_dim), focal_disparity, intensity};
}

Dataset load_dataset(const DatasetManifest& manifest, const LatentCodec& codec, std::size_t max_train) {
  Dataset ds;
  std::map<std::string, Latent> aif_cache;
  for (const auto& e : manifest.entries) {
    const bool is_eval = e.split == "eval";
    if (!is_eval && max_train > 0 && ds.train.size() >= max_train) continue;
    auto it = aif_cache.find(e.aif);
    if (it == aif_cache.end())
      it = aif_cache.emplace(e.aif, codec.encode(load_image(manifest.resolve(e.aif)))).first;
    Example ex;
    ex.scene_id = e.scene_id;
    ex.aif = it->second;
    ex.bokeh_image = load_image(manifest.resolve(e.bokeh));
    ex.bokeh = codec.encode(ex.bokeh_image);
    ex.focal_disparity = e.focal_disparity;
    ex.intensity = e.intensity;
    if (!ex.aif.same_shape(ex.bokeh)) throw IoError("scene " + e.scene_id + " has mismatched images");
    (is_eval ? ds.eval : ds.train).push_back(std::move(ex));
  }
  if (ds.train.empty() && ds.eval.empty()) throw std::invalid_argument("dataset has no entries");
  const auto& any = !ds.train.empty() ? ds.train.front() : ds.eval.front();
  ds.latent_height = any.aif.height;
  ds.latent_width = any.aif.width;
  ds.latent_channels = any.aif.channels;
  return ds;
}

namespace {

Latent gaussian_latent(int h, int w, int c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Latent z(h, w, c);
  for (double& v : z.data) v = n(rng);
  return z;
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

struct BatchItem {
  const Example* example = nullptr;
  double t = 0;
  Latent source;
};

}  // namespace

TrainResult train(const TrainConfig& config, const std::vector<Example>& examples, int lh, int lw,
                  int lc, const LogSink& sink) {
  config.validate();
  if (examples.empty()) throw std::invalid_argument("training set is empty");
  const auto start = std::chrono::steady_clock::now();

  TrainResult result;
  result.net = VectorFieldNet(config.net_config(lh, lw, lc), derive_seed(config.seed, 1));
  VectorFieldNet& net = result.net;
  AdamState adam = AdamState::for_params(net.params());

  std::mt19937_64 rng(derive_seed(config.seed, 2));
  std::uniform_int_distribution<std::size_t> pick(0, examples.size() - 1);
  std::uniform_real_distribution<double> uniform_t(0.0, 1.0);

  const int batch = config.batch_size;
  std::vector<BatchItem> items(static_cast<std::size_t>(batch));
  std::vector<Gradients> item_grads(static_cast<std::size_t>(batch), net.params().zeros_like());
  std::vector<double> item_loss(static_cast<std::size_t>(batch));
  std::vector<std::string> item_error(static_cast<std::size_t>(batch));
  Gradients grads = net.params().zeros_like();

  for (int iter = 0; iter < config.iterations; ++iter) {
    // All randomness is drawn here, in a fixed order, before the parallel part.
    for (auto& item : items) {
      item.example = &examples[pick(rng)];
      item.t = uniform_t(rng);
      if (config.path_source == PathSource::Noise)
        item.source = gaussian_latent(lh, lw, lc, rng);
    }

#pragma omp parallel for schedule(static)
    for (int b = 0; b < batch; ++b) {
      try {
        const BatchItem& item = items[b];
        const Example& ex = *item.example;
        const Latent& source = config.path_source == PathSource::Noise ? item.source : ex.aif;
        const PathSample ps = interpolate(source, ex.bokeh, item.t);
        const Latent target =
            config.loss_mode == LossMode::Velocity ? velocity_target(ps) : residual_target(ps);
        const Conditioning cond = make_conditioning(ex.focal_disparity, ex.intensity, config.control_dim);
        ForwardCache cache;
        const Latent pred = net.forward(ps.state, ex.aif, cond, item.t, &cache);
        item_loss[b] = mean_squared_error(pred, target);
        Latent upstream(lh, lw, lc);
        const double scale = 2.0 / static_cast<double>(pred.size()) / batch;
        for (std::size_t i = 0; i < pred.size(); ++i)
          upstream.data[i] = scale * (pred.data[i] - target.data[i]);
        item_grads[b].set_zero();
        net.backward(cache, upstream, item_grads[b]);
      } catch (const std::exception& e) {
        item_error[b] = e.what();
      }
    }

    for (const auto& e : item_error)
      if (!e.empty()) throw std::runtime_error("training step failed: " + e);
    double loss = 0.0;
    grads.set_zero();
    for (int b = 0; b < batch; ++b) {
      loss += item_loss[b];
      grads.add_inplace(item_grads[b]);
    }
    loss /= batch;
    if (!std::isfinite(loss) || !grads.all_finite()) {
      std::ostringstream msg;
      msg << "non-finite loss at iteration " << iter + 1 << " (loss " << loss << ", lr "
          << config.lr_at(iter) << ")";
      throw std::runtime_error(msg.str());
    }
    adam_step(net.params(), grads, adam, config.lr_at(iter));
    result.final_loss = loss;

    const int n = iter + 1;
    if (n == 1 || n % config.log_every == 0 || n == config.iterations) {
      LogRecord rec{n, loss, config.lr_at(iter), elapsed_ms(start)};
      result.log.push_back(rec);
      if (sink) sink(rec);
    }
  }
  result.wall_ms = elapsed_ms(start);
  return result;
}

Latent sampling_start(PathSource source, const Latent& aif, std::uint64_t seed) {
  if (source == PathSource::AllInFocus) return aif;
  std::mt19937_64 rng(seed);
  return gaussian_latent(aif.height, aif.width, aif.channels, rng);
}

Latent sample(const VectorFieldNet& net, const TrainConfig& config, const Example& ex, int steps,
              std::uint64_t noise_seed) {
  const Conditioning cond = make_conditioning(ex.focal_disparity, ex.intensity, config.control_dim);
  const Predictor field = [&](const Latent& state, double t) {
    return net.forward(state, ex.aif, cond, t);
  };
  return integrate(sampling_start(config.path_source, ex.aif, noise_seed), field, config.loss_mode,
                   steps);
}

std::vector<StepScores> evaluate(const VectorFieldNet& net, const TrainConfig& config,
                                 const std::vector<Example>& examples, const LatentCodec& codec,
                                 const EdgeMaskParams& mask, const SsimParams& ssim_params) {
  if (examples.empty()) throw std::invalid_argument("evaluation set is empty");
  std::vector<StepScores> out;
  for (int steps : config.eval_steps) {
    std::vector<QualityScores> per(examples.size());
    std::vector<std::string> errors(examples.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::size_t i = 0; i < examples.size(); ++i) {
      try {
        const Latent z = sample(net, config, examples[i], steps, derive_seed(config.seed ^ 0xe7a1, i));
        per[i] = score_pair_lenient(codec.decode(z), examples[i].bokeh_image, mask, ssim_params);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
    for (const auto& e : errors)
      if (!e.empty()) throw std::runtime_error("evaluation failed: " + e);
    out.push_back({steps, summarize(per)});
  }
  return out;
}

nlohmann::json scores_to_json(const QualityScores& s) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"psnr", num(s.psnr)}, {"ssim", num(s.ssim)}, {"psnr_eg", num(s.psnr_eg)},
          {"ssim_eg", num(s.ssim_eg)}};
}

std::string log_to_jsonl(const std::vector<LogRecord>& log) {
  std::string out;
  for (const auto& r : log) {
    out += nlohmann::json{{"iter", r.iter}, {"loss", r.loss}, {"lr", r.lr}, {"wall_ms", r.wall_ms}}.dump();
    out += '\n';
  }
  return out;
}

const ArmReport& AblationReport::arm(PathSource source, ControlMode mode) const {
  for (const auto& a : arms)
    if (a.config.path_source == source && a.config.control_mode == mode) return a;
  throw std::out_of_range("ablation arm not present");
}

nlohmann::json AblationReport::to_json(const EdgeMaskParams& mask, const SsimParams& ssim,
                                       std::size_t n_train, std::size_t n_eval) const {
  nlohmann::json j;
  j["header"] = {
      {"scale_note",
       "desk-scale budget: 64x64 procedural scenes, a few thousand iterations, single step "
       "lr decay at 70% of the run; directions between arms are meaningful, magnitudes are not"},
      {"edge_mask", {{"threshold", mask.threshold}, {"dilation_radius", mask.dilation_radius}}},
      {"ssim", {{"sigma", ssim.sigma}, {"window", 2 * ssim.radius + 1}, {"k1", ssim.k1}, {"k2", ssim.k2}}},
      {"aggregation",
       "per-image scores averaged over the eval set; edge metrics over images whose reference "
       "has a non-empty edge mask"},
      {"train_examples", n_train},
      {"eval_examples", n_eval}};
  j["arms"] = nlohmann::json::array();
  for (const auto& a : arms) {
    nlohmann::json arm{{"name", a.name},
                       {"config", train_config_to_json(a.config)},
                       {"final_loss", a.final_loss},
                       {"wall_s", a.wall_s},
                       {"steps", nlohmann::json::object()}};
    for (const auto& s : a.scores) {
      auto entry = scores_to_json(s.mean());
      entry["images"] = s.summary.images;
      entry["edge_images"] = s.summary.edge_images;
      arm["steps"][std::to_string(s.steps)] = entry;
    }
    j["arms"].push_back(arm);
  }
  return j;
}

AblationReport run_ablation(const TrainConfig& base, const Dataset& data,
                            const std::filesystem::path& out_dir,
                            const std::function<void(const std::string&)>& progress) {
  if (data.eval.empty()) throw std::invalid_argument("ablation needs a held-out split");
  const auto codec = make_codec(base.codec);
  AblationReport report;
  for (PathSource source : {PathSource::Noise, PathSource::AllInFocus}) {
    for (ControlMode mode : {ControlMode::CrossAttention, ControlMode::Concatenation}) {
      TrainConfig cfg = base;
      cfg.path_source = source;
      cfg.loss_mode = source == PathSource::Noise ? LossMode::Velocity : LossMode::Residual;
      cfg.control_mode = mode;
      ArmReport arm;
      arm.name = to_string(source) + "+" + to_string(mode);
      arm.config = cfg;
      if (progress) progress("training " + arm.name);
      const auto t0 = std::chrono::steady_clock::now();
      TrainResult tr = train(cfg, data.train, data.latent_height, data.latent_width, data.latent_channels);
      arm.final_loss = tr.final_loss;
      arm.scores = evaluate(tr.net, cfg, data.eval, *codec);
      arm.wall_s = elapsed_ms(t0) / 1000.0;
      if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        save_checkpoint(out_dir / (to_string(source) + "_" + to_string(mode) + ".ckpt"), tr.net,
                        train_config_to_json(cfg));
      }
      if (progress) {
        std::ostringstream msg;
        msg << arm.name << ": loss " << arm.final_loss << ", " << arm.wall_s << " s";
        for (const auto& s : arm.scores)
          msg << ", steps " << s.steps << " psnr " << s.mean().psnr << " psnr_eg " << s.mean().psnr_eg;
        progress(msg.str());
      }
      report.arms.push_back(std::move(arm));
    }
  }
  return report;
}

}  // namespace bokeh
