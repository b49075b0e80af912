#pragma once

#include "bokeh/image.hpp"

namespace bokeh {

enum class Kernel { Disc };

/// Thin-lens scatter parameters. `intensity` is the blur radius in pixels at
/// a disparity offset of 1.
struct RenderParams {
  double focal_disparity = 0.5;
  double intensity = 0.0;
  double occlusion_beta = 6.0;
  bool gamma_aware = true;
  Kernel kernel = Kernel::Disc;

  void validate() const;
};

/// alpha * |d - d_f|.
double blur_radius(double disparity, const RenderParams& params);

/// Smallest scatter radius; every pixel covers at least itself.
inline constexpr double kMinScatterRadius = 0.5;

/// Serial scatter renderer. Each source pixel spreads its color uniformly
/// over a disc of radius max(r, 0.5) with weight exp(beta * d) / (pi r^2);
/// the output is the weight-normalized sum. Sources are visited in row-major
/// order, which fixes the floating-point summation order per output pixel.
ImagePlane render_bokeh(const ImagePlane& aif, const DisparityMap& disp,
                        const RenderParams& params);

/// Tiled OpenMP renderer. Every output tile owns private accumulators and
/// replays the sources of its halo in the same row-major order as
/// render_bokeh, so results are bit-identical for any tile size or worker
/// count. `workers <= 0` uses the OpenMP default.
ImagePlane render_tiled(const ImagePlane& aif, const DisparityMap& disp,
                        const RenderParams& params, int tile = 64, int workers = 0);

}  // namespace bokeh
