#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "bokeh/image.hpp"

namespace bokeh {

/// Per-pixel boolean mask, row-major.
struct EdgeMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  std::size_t count() const;
  bool at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x] != 0; }
  static EdgeMask full(int width, int height);
};

struct EdgeMaskParams {
  double threshold = 0.15;
  int dilation_radius = 4;
};

struct SsimParams {
  double sigma = 1.5;
  int radius = 5;  // 11 x 11 window
  double k1 = 0.01;
  double k2 = 0.03;
};

inline constexpr double kPsnrCap = 100.0;

/// 10 log10(1 / MSE) over all (or masked) samples, capped at 100 dB.
double psnr(const ImagePlane& a, const ImagePlane& b, const EdgeMask* mask = nullptr);

/// Per-pixel SSIM map (Gaussian window, population statistics, reflected
/// borders), averaged over channels.
std::vector<double> ssim_map(const ImagePlane& a, const ImagePlane& b, const SsimParams& params = {});

/// Mean of the SSIM map over all (or masked) pixels.
double ssim(const ImagePlane& a, const ImagePlane& b, const EdgeMask* mask = nullptr,
            const SsimParams& params = {});

/// 0.299 R + 0.587 G + 0.114 B (or the single channel).
std::vector<double> luma(const ImagePlane& img);

/// Sobel gradient magnitude of the luma, replicated borders.
std::vector<double> sobel_magnitude(const ImagePlane& img);

/// Thresholded Sobel magnitude dilated by a disc of the given radius.
EdgeMask edge_mask(const ImagePlane& reference, const EdgeMaskParams& params = {});

struct QualityScores {
  double psnr = 0;
  double ssim = 0;
  double psnr_eg = 0;
  double ssim_eg = 0;
  bool has_edges = true;  // false: edge metrics are NaN
};

/// All four scores; the edge mask always comes from `reference`. Throws when
/// the reference has no edges, since masked metrics are undefined then.
QualityScores score_pair(const ImagePlane& prediction, const ImagePlane& reference,
                         const EdgeMaskParams& mask_params = {}, const SsimParams& ssim_params = {});

/// As score_pair, but an edgeless reference yields has_edges = false and NaN
/// edge metrics instead of an error.
QualityScores score_pair_lenient(const ImagePlane& prediction, const ImagePlane& reference,
                                 const EdgeMaskParams& mask_params = {},
                                 const SsimParams& ssim_params = {});

/// Per-image average. Edge metrics average over the images that have edges;
/// they stay NaN (has_edges = false) when none do.
struct ScoreSummary {
  QualityScores mean;
  std::size_t images = 0;
  std::size_t edge_images = 0;
};
ScoreSummary summarize(const std::vector<QualityScores>& scores);

}  // namespace bokeh
