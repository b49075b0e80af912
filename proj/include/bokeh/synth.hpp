#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "bokeh/control.hpp"
#include "bokeh/image.hpp"
#include "bokeh/render.hpp"

namespace bokeh {

enum class ShapeKind { Disc, Rectangle, Blob };
enum class TextureKind { Gradient, Noise, Checker };

using Rgb = std::array<float, 3>;

struct LayerSpec {
  ShapeKind shape = ShapeKind::Disc;
  double center_x = 0;
  double center_y = 0;
  double radius_x = 0;  // disc/blob radius, rectangle half-width
  double radius_y = 0;  // rectangle half-height (unused otherwise)
  double wobble_phase = 0;  // blob outline perturbation
  int wobble_lobes = 5;
  Rgb color{};
  double disparity = 0;
};

struct SceneSpec {
  std::uint64_t seed = 0;
  int width = 64;
  int height = 64;
  TextureKind background = TextureKind::Gradient;
  Rgb background_a{};
  Rgb background_b{};
  double background_disparity = 0.1;
  /// Painted back to front; disparities strictly increase along the list.
  std::vector<LayerSpec> layers;

  void validate() const;
};

struct Scene {
  ImagePlane aif;
  DisparityMap disparity;
};

/// Random spec with 2-4 layers over a textured background.
SceneSpec random_scene_spec(std::uint64_t seed, int width, int height);

/// Deterministic raster of the layered scene with per-pixel disparity.
Scene gen_scene(const SceneSpec& spec);

struct Box {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
};

/// Median disparity inside the box; even counts take the lower middle.
double median_box_disparity(const DisparityMap& disp, const Box& box);

struct ManifestEntry {
  std::string scene_id;
  std::string aif;        // relative to the manifest directory
  std::string disparity;
  std::string prompt;
  double focal_disparity = 0;
  double intensity = 0;
  std::string bokeh;
  std::string split;      // "train" | "eval"
};

struct DatasetManifest {
  static constexpr int kVersion = 1;
  int version = kVersion;
  std::uint64_t seed = 0;
  int width = 0;
  int height = 0;
  RenderParams renderer;   // focal_disparity / intensity unused
  FocusPercentiles percentiles;
  std::vector<ManifestEntry> entries;
  std::filesystem::path root;  // directory containing manifest.json

  std::filesystem::path resolve(const std::string& rel) const { return root / rel; }
};

nlohmann::json manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& root);
void write_manifest(const DatasetManifest& m, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

struct SynthOptions {
  int n_scenes = 10;
  int controls_per_scene = 10;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  int width = 64;
  int height = 64;
  double eval_fraction = 0.1;
  double intensity_min = 10.0;
  double intensity_max = 50.0;
  double occlusion_beta = 6.0;
  bool gamma_aware = true;
  FocusPercentiles percentiles;
};

/// One sampled control: region uniform over {foreground, middle, background},
/// intensity uniform over [intensity_min, intensity_max).
BokehControl sample_control(std::uint64_t seed, const SynthOptions& options);

/// Generates scenes, renders ground truth, writes
/// out_dir/scenes/<id>/{aif.png,disp.png,bokeh_<k>.png} and out_dir/manifest.json.
DatasetManifest synthesize(const SynthOptions& options);

/// Scene ids ranked by a seed-stable hash; the first round(fraction * n) are
/// held out.
std::vector<bool> eval_split(const std::vector<std::string>& scene_ids, std::uint64_t seed,
                             double eval_fraction);

}  // namespace bokeh
