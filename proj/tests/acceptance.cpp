// One PASS/FAIL line per acceptance criterion, each with its runtime budget.
// Exit status is 0 only when every criterion passes within budget.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "bokeh/codec.hpp"
#include "bokeh/control.hpp"
#include "bokeh/flow.hpp"
#include "bokeh/metrics.hpp"
#include "bokeh/net.hpp"
#include "bokeh/png_io.hpp"
#include "bokeh/render.hpp"
#include "bokeh/synth.hpp"
#include "bokeh/trainer.hpp"
#include "gradcheck.hpp"
#include "oracles/ssim_reference.hpp"
#include "support.hpp"

using namespace bokeh;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

Latent random_latent(std::mt19937_64& rng, int h, int w, int c) {
  std::normal_distribution<double> n(0.0, 1.0);
  Latent z(h, w, c);
  for (double& v : z.data) v = n(rng);
  return z;
}

double max_abs_diff(const Latent& a, const Latent& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

bool identical(const ImagePlane& a, const ImagePlane& b) {
  return a.same_shape(b) && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

Matrix random_matrix(std::mt19937_64& rng, int r, int c, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// ---------------------------------------------------------------------------

Outcome residual_identity() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const PathSample ps = interpolate(random_latent(rng, 4, 4, 3), random_latent(rng, 4, 4, 3), u(rng));
    const Latent v = velocity_target(ps);
    const Latent r = residual_target(ps);
    for (std::size_t k = 0; k < v.size(); ++k) worst = std::max(worst, std::abs(r.data[k] - (1 - ps.t) * v.data[k]));
  }
  return {worst <= 1e-12, "max abs error " + fmt("%.3g", worst) + " over 1000 triples"};
}

Outcome oracle_transport() {
  std::mt19937_64 rng(102);
  double worst = 0;
  for (int pair = 0; pair < 20; ++pair) {
    const Latent source = random_latent(rng, 8, 8, 3);
    const Latent target = random_latent(rng, 8, 8, 3);
    const Latent velocity = velocity_target(interpolate(source, target, 0.0));
    const Predictor v_oracle = [&](const Latent&, double) { return velocity; };
    const Predictor r_oracle = [&](const Latent& state, double) {
      Latent r = target;
      for (std::size_t i = 0; i < r.size(); ++i) r.data[i] -= state.data[i];
      return r;
    };
    for (int steps : {1, 2, 4, 8}) {
      worst = std::max(worst, max_abs_diff(integrate(source, v_oracle, LossMode::Velocity, steps), target));
      worst = std::max(worst, max_abs_diff(integrate(source, r_oracle, LossMode::Residual, steps), target));
    }
  }
  return {worst <= 1e-6, "max abs error " + fmt("%.3g", worst) + " for steps {1,2,4,8}, both modes"};
}

Outcome renderer_identity() {
  std::mt19937_64 rng(103);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int w = 256, h = 256;
  int identity_fail = 0, tiled_fail = 0;
  double worst_conservation = 0;
  for (int k = 0; k < 50; ++k) {
    const DisparityMap d = k % 2 ? testing_support::random_disparity(rng, w, h)
                                 : testing_support::structured_disparity(rng, w, h);
    const ImagePlane img = testing_support::random_image(rng, w, h);
    RenderParams p;
    p.focal_disparity = u(rng);
    p.intensity = 0;
    if (!identical(render_bokeh(img, d, p), img)) ++identity_fail;

    p.intensity = 10 + 40 * u(rng);
    const ImagePlane ref = render_bokeh(img, d, p);
    if (!identical(render_tiled(img, d, p, 16 << (k % 4)), ref)) ++tiled_fail;

    const float value = static_cast<float>(u(rng));
    const ImagePlane flat = ImagePlane::filled(w, h, 3, value);
    const ImagePlane spread = render_tiled(flat, d, p);
    for (float v : spread.data())
      worst_conservation = std::max(worst_conservation, static_cast<double>(std::abs(v - value)));
  }
  std::ostringstream s;
  s << "50 maps at 256x256: identity failures " << identity_fail << ", tiled mismatches " << tiled_fail
    << ", conservation max error " << fmt("%.3g", worst_conservation);
  return {identity_fail == 0 && tiled_fail == 0 && worst_conservation <= 1e-5, s.str()};
}

// Gather-side disc mean in linear light, written independently of the scatter.
double disc_mean(const ImagePlane& lin, int x, int y, int c, double r) {
  double sum = 0;
  int n = 0;
  const int R = static_cast<int>(std::ceil(r));
  for (int dy = -R; dy <= R; ++dy)
    for (int dx = -R; dx <= R; ++dx) {
      if (dx * dx + dy * dy > r * r) continue;
      sum += lin.at(x + dx, y + dy, c);
      ++n;
    }
  return sum / n;
}

Outcome disc_oracle() {
  std::mt19937_64 rng(104);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double err = 0;
  long n = 0;
  for (int scene = 0; scene < 8; ++scene) {
    const int w = 128, h = 128;
    const ImagePlane img = testing_support::random_image(rng, w, h);
    const float back = static_cast<float>(0.05 + 0.25 * u(rng));
    const float front = static_cast<float>(0.6 + 0.4 * u(rng));
    const int cx = 24 + static_cast<int>(20 * u(rng)), cy = 24 + static_cast<int>(20 * u(rng)), cr = 12;
    std::vector<float> dv(static_cast<std::size_t>(w) * h, back);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= cr * cr) dv[static_cast<std::size_t>(y) * w + x] = front;
    const DisparityMap d(w, h, dv);
    RenderParams p;
    p.focal_disparity = front;
    p.intensity = 10 + 20 * u(rng);
    const double r = blur_radius(back, p);
    const ImagePlane out = render_tiled(img, d, p);
    const ImagePlane lin = to_linear(img);
    const int R = static_cast<int>(std::ceil(r));
    for (int y = R; y < h - R; ++y)
      for (int x = R; x < w - R; ++x) {
        if (std::hypot(x - cx, y - cy) <= cr + r + 1) continue;
        for (int c = 0; c < 3; ++c) {
          err += std::abs(std::pow(disc_mean(lin, x, y, c, r), 1.0 / kGamma) - out.at(x, y, c));
          ++n;
        }
      }
  }
  const double mae = err / static_cast<double>(n);
  return {n > 0 && mae <= 2.0 / 255, "interior MAE " + fmt("%.4f", mae * 255) + "/255 over 8 scenes"};
}

Outcome gradient_checks() {
  double worst = 0;
  std::size_t tensors = 0, max_params = 0;
  std::string worst_name;
  for (auto [mode, after] : {std::pair{ControlMode::CrossAttention, 0}, std::pair{ControlMode::CrossAttention, 1},
                             std::pair{ControlMode::Concatenation, 0}}) {
    const NetConfig c = testing_support::small_net_config(mode, after);
    max_params = std::max(max_params, VectorFieldNet(c, 1).params().parameter_count());
    for (const auto& te : testing_support::gradient_check(c, 21 + after)) {
      ++tensors;
      if (te.max_rel > worst || worst_name.empty()) {
        worst = std::max(worst, te.max_rel);
        worst_name = te.name;
      }
    }
  }
  std::ostringstream s;
  s << tensors << " tensors, nets of at most " << max_params << " parameters, worst relative error "
    << fmt("%.3g", worst) << " (" << worst_name << ")";
  return {worst < 1e-4 && max_params <= 10000, s.str()};
}

Outcome attention_invariants() {
  std::mt19937_64 rng(106);
  double row_dev = 0, pass_dev = 0;
  for (int k = 0; k < 200; ++k) {
    const int tq = 1 + k % 9, n = 1 + k % 5, dx = 4 + k % 3, dc = 3 + k % 4, d = 2 + k % 5;
    Matrix weights;
    cross_attention(random_matrix(rng, tq, dx), random_matrix(rng, n, dc), random_matrix(rng, d, dx, 2),
                    random_matrix(rng, d, dc, 2), random_matrix(rng, d, dc), &weights);
    for (Eigen::Index r = 0; r < weights.rows(); ++r) {
      row_dev = std::max(row_dev, std::abs(weights.row(r).sum() - 1.0));
      row_dev = std::max(row_dev, std::max(0.0, -weights.row(r).minCoeff()));
    }
    const Matrix single = random_matrix(rng, 1, dc);
    const Matrix wv = random_matrix(rng, d, dc);
    const Matrix out = cross_attention(random_matrix(rng, tq, dx), single, random_matrix(rng, d, dx),
                                       random_matrix(rng, d, dc), wv);
    const Matrix v = single * wv.transpose();
    for (Eigen::Index r = 0; r < out.rows(); ++r)
      pass_dev = std::max(pass_dev, (out.row(r) - v.row(0)).cwiseAbs().maxCoeff());
  }
  return {row_dev <= 1e-6 && pass_dev <= 1e-12,
          "200 cases: row-sum deviation " + fmt("%.3g", row_dev) + ", singleton deviation " + fmt("%.3g", pass_dev)};
}

Outcome metric_identities() {
  std::mt19937_64 rng(107);
  std::uniform_int_distribution<int> size(12, 48);
  int fails = 0;
  for (int k = 0; k < 100; ++k) {
    const int w = size(rng), h = size(rng);
    const ImagePlane a = testing_support::random_image(rng, w, h);
    const ImagePlane b = testing_support::random_image(rng, w, h);
    const EdgeMask full = EdgeMask::full(w, h);
    if (psnr(a, a) != kPsnrCap) ++fails;
    if (ssim(a, a) != 1.0) ++fails;
    if (psnr(a, b, &full) != psnr(a, b)) ++fails;
    if (ssim(a, b, &full) != ssim(a, b)) ++fails;
  }
  double worst = 0;
  for (int k = 0; k < oracle::kSsimPairs; ++k) {
    const auto p = testing_support::oracle_pair(k);
    worst = std::max(worst, std::abs(ssim(p.a, p.b) - oracle::kSsimReference[k]));
  }
  std::ostringstream s;
  s << "identity failures " << fails << " on 100 pairs, reference SSIM max deviation " << fmt("%.3g", worst)
    << " on " << oracle::kSsimPairs << " pairs";
  return {fails == 0 && worst <= 1e-4, s.str()};
}

bool same_control(const BokehControl& a, const BokehControl& b) {
  return a.focus == b.focus && a.intensity == b.intensity &&
         (a.focus != FocusRegion::AtDisparity || a.disparity == b.disparity);
}

Outcome parser_round_trip() {
  int fails = 0, cases = 0;
  for (FocusRegion r : {FocusRegion::Foreground, FocusRegion::Middle, FocusRegion::Background})
    for (int i = 0; i <= 60; ++i) {
      BokehControl c;
      c.focus = r;
      c.intensity = i;
      ++cases;
      if (!same_control(parse_prompt(format_prompt(c)), c)) ++fails;
    }
  std::mt19937_64 rng(108);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    BokehControl c;
    c.focus = FocusRegion::AtDisparity;
    c.disparity = u(rng);
    c.intensity = 60 * u(rng);
    ++cases;
    if (!same_control(parse_prompt(format_prompt(c)), c)) ++fails;
  }
  const BokehControl lit = parse_prompt("focus on the foreground with blur intensity of 30");
  const bool literal = lit.focus == FocusRegion::Foreground && lit.intensity == 30.0;
  std::ostringstream s;
  s << fails << " failures in " << cases << " round trips, literal prompt " << (literal ? "ok" : "wrong");
  return {fails == 0 && literal, s.str()};
}

// Kolmogorov distribution tail with the usual finite-n correction.
double ks_p_value(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  double sum = 0, sign = 1;
  for (int j = 1; j <= 100; ++j) {
    sum += sign * std::exp(-2.0 * j * j * lambda * lambda);
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

Outcome protocol_fidelity(const fs::path& work) {
  SynthOptions o;
  o.n_scenes = 100;
  o.controls_per_scene = 10;
  o.seed = 2024;
  o.out_dir = work / "protocol";
  fs::remove_all(o.out_dir);
  synthesize(o);
  const DatasetManifest m = load_manifest(o.out_dir / "manifest.json");
  std::vector<double> alpha;
  for (const auto& e : m.entries) alpha.push_back(e.intensity);
  std::sort(alpha.begin(), alpha.end());
  const double n = static_cast<double>(alpha.size());
  double dmax = 0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    const double f = std::clamp((alpha[i] - 10.0) / 40.0, 0.0, 1.0);
    dmax = std::max({dmax, (static_cast<double>(i) + 1) / n - f, f - static_cast<double>(i) / n});
  }
  const double p = ks_p_value(dmax, alpha.size());

  int mismatches = 0;
  for (const auto& e : m.entries) {
    RenderParams params = m.renderer;
    params.focal_disparity = resolve_focus(parse_prompt(e.prompt), load_disparity(m.resolve(e.disparity)),
                                           m.percentiles);
    params.intensity = e.intensity;
    if (params.focal_disparity != e.focal_disparity) ++mismatches;
    const auto png = encode_png(render_tiled(load_image(m.resolve(e.aif)), load_disparity(m.resolve(e.disparity)),
                                             params));
    if (png != read_file(m.resolve(e.bokeh))) ++mismatches;
  }
  std::ostringstream s;
  s << "KS D=" << fmt("%.4f", dmax) << " p=" << fmt("%.3f", p) << " (n=" << alpha.size() << "), re-render mismatches "
    << mismatches << " of " << m.entries.size();
  return {alpha.size() == 1000 && p > 0.01 && mismatches == 0, s.str()};
}

struct AblationRun {
  bool ran = false;
  std::string error;
  AblationReport report;
  double seconds = 0;
};

AblationRun& ablation(const fs::path& work) {
  static AblationRun run;
  if (run.ran) return run;
  run.ran = true;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    SynthOptions o;
    o.n_scenes = 220;
    o.controls_per_scene = 5;
    o.seed = 1;
    o.eval_fraction = 20.0 / 220.0;
    o.out_dir = work / "ablation_data";
    fs::remove_all(o.out_dir);
    synthesize(o);
    const auto codec = make_codec("identity");
    const Dataset data = load_dataset(load_manifest(o.out_dir / "manifest.json"), *codec);
    TrainConfig base;
    base.seed = 0;
    run.report = run_ablation(base, data, work / "ablation_checkpoints",
                              [](const std::string& msg) { std::cerr << "  " << msg << "\n"; });
    const std::string text = run.report.to_json({}, {}, data.train.size(), data.eval.size()).dump(2) + "\n";
    write_file(work / "ablation_report.json",
               std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  } catch (const std::exception& e) {
    run.error = e.what();
  }
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

const QualityScores* scores_at(const ArmReport& arm, int steps) {
  for (const auto& s : arm.scores)
    if (s.steps == steps) return &s.mean();
  return nullptr;
}

Outcome direct_transport_direction(const fs::path& work) {
  const AblationRun& run = ablation(work);
  if (!run.error.empty()) return {false, "ablation failed: " + run.error};
  const auto* aif = scores_at(run.report.arm(PathSource::AllInFocus, ControlMode::CrossAttention), 1);
  const auto* noise = scores_at(run.report.arm(PathSource::Noise, ControlMode::CrossAttention), 1);
  const double margin = aif->psnr - noise->psnr;
  return {margin > 0.1, "steps=1 PSNR aif " + fmt("%.3f", aif->psnr) + " dB vs noise " + fmt("%.3f", noise->psnr) +
                            " dB, margin " + fmt("%.3f", margin) + " dB"};
}

Outcome cross_attention_direction(const fs::path& work) {
  const AblationRun& run = ablation(work);
  if (!run.error.empty()) return {false, "ablation failed: " + run.error};
  const auto* xattn = scores_at(run.report.arm(PathSource::AllInFocus, ControlMode::CrossAttention), 1);
  const auto* concat = scores_at(run.report.arm(PathSource::AllInFocus, ControlMode::Concatenation), 1);
  const double margin = xattn->psnr_eg - concat->psnr_eg;
  return {margin > 0.1, "steps=1 PSNR_eg xattn " + fmt("%.3f", xattn->psnr_eg) + " dB vs concat " +
                            fmt("%.3f", concat->psnr_eg) + " dB, margin " + fmt("%.3f", margin) + " dB"};
}

TrainConfig overfit_config() {
  TrainConfig c;
  c.iterations = 2000;
  c.decay_step = 1400;
  return c;
}

Outcome single_scene_overfit(const fs::path& work) {
  SynthOptions o;
  o.n_scenes = 1;
  o.controls_per_scene = 1;
  o.seed = 77;
  o.eval_fraction = 0;
  o.out_dir = work / "overfit_data";
  fs::remove_all(o.out_dir);
  synthesize(o);
  const auto codec = make_codec("identity");
  const Dataset data = load_dataset(load_manifest(o.out_dir / "manifest.json"), *codec);
  TrainConfig c = overfit_config();
  const TrainResult r = train(c, data.train, data.latent_height, data.latent_width, data.latent_channels);
  const Example& ex = data.train.front();
  const double p = psnr(codec->decode(sample(r.net, c, ex, 1, 0)), ex.bokeh_image);
  return {p >= 35.0, "1-step PSNR " + fmt("%.2f", p) + " dB after " + std::to_string(c.iterations) +
                         " iterations (final loss " + fmt("%.3g", r.final_loss) + ")"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  std::string work_dir = (fs::temp_directory_path() / "bokeh_acceptance").string();
  std::vector<std::string> only;
  app.add_option("--work-dir", work_dir, "Scratch directory for synthesized data and reports");
  app.add_option("--only", only, "Run only the named criteria");
  CLI11_PARSE(app, argc, argv);
  const fs::path work(work_dir);
  fs::create_directories(work);

  struct Criterion {
    std::string name;
    double budget_s;
    std::function<Outcome()> run;
    bool shares_ablation = false;
  };
  const std::vector<Criterion> criteria{
      {"residual-identity", 1, residual_identity},
      {"oracle-transport", 1, oracle_transport},
      {"renderer-identity-conservation", 30, renderer_identity},
      {"disc-convolution-oracle", 60, disc_oracle},
      {"gradient-checks", 120, gradient_checks},
      {"cross-attention-invariants", 5, attention_invariants},
      {"metric-identities", 30, metric_identities},
      {"parser-round-trip", 1, parser_round_trip},
      {"protocol-fidelity", 300, [&] { return protocol_fidelity(work); }},
      {"ablation-direct-transport", 1800, [&] { return direct_transport_direction(work); }, true},
      {"ablation-cross-attention", 1800, [&] { return cross_attention_direction(work); }, true},
      {"single-scene-overfit", 600, [&] { return single_scene_overfit(work); }},
  };

  int failed = 0, ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.name) == only.end()) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.shares_ablation) seconds = ablation(work).seconds;
    const bool in_budget = seconds < c.budget_s;
    const bool pass = out.ok && in_budget;
    failed += !pass;
    std::cout << (pass ? "PASS " : "FAIL ") << c.name << ": " << out.detail << " [" << fmt("%.2f", seconds)
              << " s, budget " << fmt("%.0f", c.budget_s) << " s" << (in_budget ? "" : ", over budget") << "]"
              << std::endl;
  }
  std::cout << (ran - failed) << "/" << ran << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
