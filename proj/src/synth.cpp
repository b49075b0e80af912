#include "bokeh/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

#include "bokeh/png_io.hpp"
#include "bokeh/rng.hpp"

namespace bokeh {

void SceneSpec::validate() const {
  if (width <= 0 || height <= 0) throw std::invalid_argument("scene canvas must be positive");
  double prev = background_disparity;
  if (!(prev >= 0.0 && prev <= 1.0))
    throw std::invalid_argument("background disparity outside [0,1]");
  for (const auto& layer : layers) {
    if (!(layer.disparity >= 0.0 && layer.disparity <= 1.0))
      throw std::invalid_argument("layer disparity outside [0,1]");
    if (!(layer.disparity > prev))
      throw std::invalid_argument("layer disparities must strictly increase front-wards");
    prev = layer.disparity;
  }
}

namespace {

Rgb random_color(std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.05f, 0.95f);
  return {u(rng), u(rng), u(rng)};
}

bool inside(const LayerSpec& l, double x, double y) {
  const double dx = x - l.center_x;
  const double dy = y - l.center_y;
  switch (l.shape) {
    case ShapeKind::Disc: return dx * dx + dy * dy <= l.radius_x * l.radius_x;
    case ShapeKind::Rectangle: return std::abs(dx) <= l.radius_x && std::abs(dy) <= l.radius_y;
    case ShapeKind::Blob: {
      const double r = std::sqrt(dx * dx + dy * dy);
      const double theta = std::atan2(dy, dx);
      const double edge = l.radius_x * (1.0 + 0.25 * std::sin(l.wobble_lobes * theta + l.wobble_phase));
      return r <= edge;
    }
  }
  return false;
}

/// Smooth value noise in [0,1] on a lattice of `cell` pixels.
class ValueNoise {
 public:
  ValueNoise(std::uint64_t seed, int width, int height, int cell)
      : cell_(cell), gw_(width / cell + 2), gh_(height / cell + 2),
        lattice_(static_cast<std::size_t>(gw_) * gh_) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double& v : lattice_) v = u(rng);
  }

  double operator()(double x, double y) const {
    const double fx = x / cell_;
    const double fy = y / cell_;
    const int ix = static_cast<int>(fx);
    const int iy = static_cast<int>(fy);
    const double tx = smooth(fx - ix);
    const double ty = smooth(fy - iy);
    const double a = at(ix, iy), b = at(ix + 1, iy), c = at(ix, iy + 1), d = at(ix + 1, iy + 1);
    return (1 - ty) * ((1 - tx) * a + tx * b) + ty * ((1 - tx) * c + tx * d);
  }

 private:
  static double smooth(double t) { return t * t * (3 - 2 * t); }
  double at(int x, int y) const { return lattice_[static_cast<std::size_t>(y) * gw_ + x]; }

  int cell_, gw_, gh_;
  std::vector<double> lattice_;
};

}  // namespace

SceneSpec random_scene_spec(std::uint64_t seed, int width, int height) {
  std::mt19937_64 rng(seed);
  SceneSpec spec;
  spec.seed = seed;
  spec.width = width;
  spec.height = height;
  spec.background = static_cast<TextureKind>(std::uniform_int_distribution<int>(0, 2)(rng));
  spec.background_a = random_color(rng);
  spec.background_b = random_color(rng);
  spec.background_disparity = std::uniform_real_distribution<double>(0.0, 0.2)(rng);

  const int n_layers = std::uniform_int_distribution<int>(2, 4)(rng);
  std::vector<double> disparities(static_cast<std::size_t>(n_layers));
  // stratified so consecutive layers stay well separated in depth
  const double lo = 0.3;
  const double step = (1.0 - lo) / n_layers;
  for (int i = 0; i < n_layers; ++i)
    disparities[i] = lo + step * (i + std::uniform_real_distribution<double>(0.15, 0.85)(rng));

  const double s = std::min(width, height);
  for (int i = 0; i < n_layers; ++i) {
    LayerSpec l;
    l.shape = static_cast<ShapeKind>(std::uniform_int_distribution<int>(0, 2)(rng));
    // farther layers are larger, nearer ones smaller
    const double scale = 0.38 - 0.06 * i;
    l.radius_x = s * std::uniform_real_distribution<double>(scale * 0.6, scale)(rng);
    l.radius_y = l.shape == ShapeKind::Rectangle
                     ? s * std::uniform_real_distribution<double>(scale * 0.5, scale)(rng)
                     : l.radius_x;
    l.center_x = std::uniform_real_distribution<double>(0.2 * width, 0.8 * width)(rng);
    l.center_y = std::uniform_real_distribution<double>(0.2 * height, 0.8 * height)(rng);
    l.wobble_phase = std::uniform_real_distribution<double>(0.0, 2 * std::numbers::pi)(rng);
    l.wobble_lobes = std::uniform_int_distribution<int>(3, 7)(rng);
    l.color = random_color(rng);
    l.disparity = disparities[i];
    spec.layers.push_back(l);
  }
  return spec;
}

Scene gen_scene(const SceneSpec& spec) {
  spec.validate();
  const int w = spec.width;
  const int h = spec.height;
  std::vector<float> rgb(static_cast<std::size_t>(w) * h * 3);
  std::vector<float> disp(static_cast<std::size_t>(w) * h);
  const ValueNoise noise(derive_seed(spec.seed, 0x7e47), w, h, std::max(4, std::min(w, h) / 4));
  const int checker = std::max(2, std::min(w, h) / 8);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double px = x + 0.5;
      const double py = y + 0.5;
      double t = 0.0;
      switch (spec.background) {
        case TextureKind::Gradient: t = (px / w + py / h) * 0.5; break;
        case TextureKind::Noise: t = noise(px, py); break;
        case TextureKind::Checker: t = ((x / checker + y / checker) % 2) ? 1.0 : 0.0; break;
      }
      Rgb color;
      for (int c = 0; c < 3; ++c)
        color[c] = static_cast<float>((1 - t) * spec.background_a[c] + t * spec.background_b[c]);
      double d = spec.background_disparity;
      for (const auto& layer : spec.layers) {
        if (inside(layer, px, py)) {
          color = layer.color;
          d = layer.disparity;
        }
      }
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      for (int c = 0; c < 3; ++c) rgb[3 * i + c] = color[c];
      disp[i] = static_cast<float>(d);
    }
  }
  return Scene{ImagePlane(w, h, 3, std::move(rgb)), DisparityMap(w, h, std::move(disp))};
}

double median_box_disparity(const DisparityMap& disp, const Box& box) {
  if (box.width <= 0 || box.height <= 0) throw std::invalid_argument("empty box");
  if (box.x < 0 || box.y < 0 || box.x + box.width > disp.width() ||
      box.y + box.height > disp.height())
    throw std::invalid_argument("box outside the disparity map");
  std::vector<float> values;
  values.reserve(static_cast<std::size_t>(box.width) * box.height);
  for (int y = box.y; y < box.y + box.height; ++y)
    for (int x = box.x; x < box.x + box.width; ++x) values.push_back(disp.at(x, y));
  const std::size_t k = (values.size() - 1) / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end());
  return values[k];
}

// ---------------------------------------------------------------------------
// manifest

nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json j;
  j["version"] = m.version;
  j["seed"] = m.seed;
  j["canvas"] = {m.width, m.height};
  j["renderer"] = {{"kernel", "disc"},
                   {"occlusion_beta", m.renderer.occlusion_beta},
                   {"gamma_aware", m.renderer.gamma_aware},
                   {"min_radius", kMinScatterRadius}};
  j["protocol"] = {
      {"focus_sampling", "uniform over {foreground, middle, background} (assumed law)"},
      {"percentiles",
       {{"foreground", m.percentiles.foreground},
        {"middle", m.percentiles.middle},
        {"background", m.percentiles.background}}}};
  j["entries"] = nlohmann::json::array();
  for (const auto& e : m.entries)
    j["entries"].push_back({{"scene_id", e.scene_id},
                            {"aif", e.aif},
                            {"disparity", e.disparity},
                            {"prompt", e.prompt},
                            {"focal_disparity", e.focal_disparity},
                            {"intensity", e.intensity},
                            {"bokeh", e.bokeh},
                            {"split", e.split}});
  return j;
}

DatasetManifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& root) {
  DatasetManifest m;
  m.version = j.at("version").get<int>();
  if (m.version != DatasetManifest::kVersion)
    throw IoError("unsupported manifest version " + std::to_string(m.version));
  m.seed = j.at("seed").get<std::uint64_t>();
  m.width = j.at("canvas").at(0).get<int>();
  m.height = j.at("canvas").at(1).get<int>();
  const auto& r = j.at("renderer");
  m.renderer.occlusion_beta = r.at("occlusion_beta").get<double>();
  m.renderer.gamma_aware = r.at("gamma_aware").get<bool>();
  if (j.contains("protocol") && j["protocol"].contains("percentiles")) {
    const auto& p = j["protocol"]["percentiles"];
    m.percentiles.foreground = p.at("foreground").get<double>();
    m.percentiles.middle = p.at("middle").get<double>();
    m.percentiles.background = p.at("background").get<double>();
  }
  for (const auto& e : j.at("entries")) {
    ManifestEntry entry;
    entry.scene_id = e.at("scene_id").get<std::string>();
    entry.aif = e.at("aif").get<std::string>();
    entry.disparity = e.at("disparity").get<std::string>();
    entry.prompt = e.at("prompt").get<std::string>();
    entry.focal_disparity = e.at("focal_disparity").get<double>();
    entry.intensity = e.at("intensity").get<double>();
    entry.bokeh = e.at("bokeh").get<std::string>();
    entry.split = e.at("split").get<std::string>();
    m.entries.push_back(std::move(entry));
  }
  m.root = root;
  return m;
}

void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  const std::string text = manifest_to_json(m).dump(2) + "\n";
  write_file(path, std::span<const std::uint8_t>(
                       reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed manifest " + path.string() + ": " + e.what());
  }
  return manifest_from_json(j, path.parent_path());
}

// ---------------------------------------------------------------------------
// synthesis

BokehControl sample_control(std::uint64_t seed, const SynthOptions& options) {
  std::mt19937_64 rng(seed);
  BokehControl c;
  c.focus = static_cast<FocusRegion>(std::uniform_int_distribution<int>(0, 2)(rng));
  c.intensity =
      std::uniform_real_distribution<double>(options.intensity_min, options.intensity_max)(rng);
  return c;
}

std::vector<bool> eval_split(const std::vector<std::string>& scene_ids, std::uint64_t seed,
                             double eval_fraction) {
  std::vector<std::pair<std::uint64_t, std::size_t>> ranked;
  for (std::size_t i = 0; i < scene_ids.size(); ++i) {
    std::uint64_t h = splitmix64(seed);
    for (unsigned char ch : scene_ids[i]) h = splitmix64(h ^ ch);
    ranked.emplace_back(h, i);
  }
  std::sort(ranked.begin(), ranked.end());
  const auto n_eval = static_cast<std::size_t>(
      std::lround(std::clamp(eval_fraction, 0.0, 1.0) * static_cast<double>(scene_ids.size())));
  std::vector<bool> is_eval(scene_ids.size(), false);
  for (std::size_t k = 0; k < n_eval; ++k) is_eval[ranked[k].second] = true;
  return is_eval;
}

namespace {

std::string scene_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d", index);
  return buf;
}

}  // namespace

DatasetManifest synthesize(const SynthOptions& o) {
  if (o.n_scenes < 1) throw std::invalid_argument("need at least one scene");
  if (o.controls_per_scene < 1) throw std::invalid_argument("need at least one control per scene");
  namespace fs = std::filesystem;
  fs::create_directories(o.out_dir / "scenes");

  DatasetManifest m;
  m.seed = o.seed;
  m.width = o.width;
  m.height = o.height;
  m.renderer.occlusion_beta = o.occlusion_beta;
  m.renderer.gamma_aware = o.gamma_aware;
  m.percentiles = o.percentiles;
  m.root = o.out_dir;

  std::vector<std::string> ids;
  for (int i = 0; i < o.n_scenes; ++i) ids.push_back(scene_name(i));
  const auto is_eval = eval_split(ids, o.seed, o.eval_fraction);

  std::vector<std::vector<ManifestEntry>> per_scene(static_cast<std::size_t>(o.n_scenes));
  std::vector<std::string> errors(static_cast<std::size_t>(o.n_scenes));

#pragma omp parallel for schedule(dynamic, 1)
  for (int i = 0; i < o.n_scenes; ++i) {
    try {
      const std::uint64_t scene_seed = derive_seed(o.seed, static_cast<std::uint64_t>(i));
      const Scene scene = gen_scene(random_scene_spec(scene_seed, o.width, o.height));
      // Store exactly what a loader will see again: 8-bit color, and a
      // disparity map that is already a fixed point of 16-bit quantization
      // plus min-max normalization.
      const ImagePlane aif = decode_png(encode_png(scene.aif));
      const DisparityMap disp = quantize_disparity(quantize_disparity(scene.disparity));
      const std::string dir = "scenes/" + ids[i];
      fs::create_directories(o.out_dir / dir);
      save_image(aif, o.out_dir / dir / "aif.png");
      save_disparity(disp, o.out_dir / dir / "disp.png");
      for (int k = 0; k < o.controls_per_scene; ++k) {
        const BokehControl control =
            sample_control(derive_seed(scene_seed, 1000 + static_cast<std::uint64_t>(k)), o);
        RenderParams params;
        params.focal_disparity = resolve_focus(control, disp, o.percentiles);
        params.intensity = control.intensity;
        params.occlusion_beta = o.occlusion_beta;
        params.gamma_aware = o.gamma_aware;
        const ImagePlane bokeh = render_tiled(aif, disp, params);
        const std::string bokeh_rel = dir + "/bokeh_" + std::to_string(k) + ".png";
        save_image(bokeh, o.out_dir / bokeh_rel);
        per_scene[i].push_back({ids[i], dir + "/aif.png", dir + "/disp.png", format_prompt(control),
                                params.focal_disparity, params.intensity, bokeh_rel,
                                is_eval[i] ? "eval" : "train"});
      }
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw IoError("dataset synthesis failed: " + e);
  for (auto& entries : per_scene)
    for (auto& e : entries) m.entries.push_back(std::move(e));
  write_manifest(m, o.out_dir / "manifest.json");
  return m;
}

}  // namespace bokeh
