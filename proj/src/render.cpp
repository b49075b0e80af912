#include "bokeh/render.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace bokeh {

void RenderParams::validate() const {
  if (!(focal_disparity >= 0.0 && focal_disparity <= 1.0))
    throw std::invalid_argument("focal disparity must lie in [0,1]");
  if (!(intensity >= 0.0) || !std::isfinite(intensity))
    throw std::invalid_argument("blur intensity must be finite and >= 0");
  if (!(occlusion_beta >= 0.0) || !std::isfinite(occlusion_beta))
    throw std::invalid_argument("occlusion beta must be finite and >= 0");
}

double blur_radius(double disparity, const RenderParams& params) {
  return params.intensity * std::abs(disparity - params.focal_disparity);
}

namespace {

struct Source {
  double radius_sq;
  int extent;
  // Weights carry only float precision so that w * c is exact in double and a
  // lone contributor divides back to its own color.
  float weight;
};

struct Prepared {
  int width;
  int height;
  int max_extent;
  std::vector<Source> sources;
  std::vector<float> color;  // 3 floats per pixel, working color space
  ColorEncoding working;
};

Prepared prepare(const ImagePlane& aif, const DisparityMap& disp, const RenderParams& params) {
  params.validate();
  if (aif.empty() || disp.empty()) throw std::invalid_argument("cannot render an empty image");
  if (!disp.matches(aif))
    throw std::invalid_argument("image and disparity dimensions differ");
  if (aif.channels() != 3) throw std::invalid_argument("renderer expects a 3-channel image");

  const ImagePlane working = params.gamma_aware ? to_linear(aif) : aif;
  Prepared p;
  p.width = aif.width();
  p.height = aif.height();
  p.working = working.encoding();
  p.color.assign(working.data().begin(), working.data().end());
  p.sources.resize(aif.pixel_count());
  p.max_extent = 0;
  for (std::size_t i = 0; i < p.sources.size(); ++i) {
    const double d = disp.data()[i];
    const double r = std::max(blur_radius(d, params), kMinScatterRadius);
    Source& s = p.sources[i];
    s.radius_sq = r * r;
    s.extent = static_cast<int>(std::floor(r));
    s.weight = static_cast<float>(std::exp(params.occlusion_beta * d) /
                                  (std::numbers::pi * r * r));
    p.max_extent = std::max(p.max_extent, s.extent);
  }
  return p;
}

// Largest |dx| with dx^2 + dy^2 <= r^2.
inline int row_half_width(const Source& s, int dy) {
  const double rem = s.radius_sq - static_cast<double>(dy) * dy;
  if (rem < 0.0) return -1;
  int hw = static_cast<int>(std::sqrt(rem));
  while (static_cast<double>(hw + 1) * (hw + 1) <= rem) ++hw;
  while (hw > 0 && static_cast<double>(hw) * hw > rem) --hw;
  return hw;
}

/// Accumulators for the output rectangle [x0,x1) x [y0,y1).
struct Accumulator {
  int x0, y0, x1, y1;
  std::vector<double> weight;
  std::vector<double> color;

  Accumulator(int x0_, int y0_, int x1_, int y1_)
      : x0(x0_), y0(y0_), x1(x1_), y1(y1_),
        weight(static_cast<std::size_t>(x1_ - x0_) * (y1_ - y0_), 0.0),
        color(weight.size() * 3, 0.0) {}

  int stride() const { return x1 - x0; }
};

/// Scatters every source in [sx0,sx1) x [sy0,sy1), row-major, clipped to acc.
void scatter_sources(const Prepared& p, int sx0, int sy0, int sx1, int sy1, Accumulator& acc) {
  for (int y = sy0; y < sy1; ++y) {
    for (int x = sx0; x < sx1; ++x) {
      const std::size_t src = static_cast<std::size_t>(y) * p.width + x;
      const Source& s = p.sources[src];
      const double w = s.weight;
      const double c0 = w * p.color[3 * src + 0];
      const double c1 = w * p.color[3 * src + 1];
      const double c2 = w * p.color[3 * src + 2];
      const int dy_lo = std::max(-s.extent, acc.y0 - y);
      const int dy_hi = std::min(s.extent, acc.y1 - 1 - y);
      for (int dy = dy_lo; dy <= dy_hi; ++dy) {
        const int hw = row_half_width(s, dy);
        if (hw < 0) continue;
        const int qx_lo = std::max(x - hw, acc.x0);
        const int qx_hi = std::min(x + hw, acc.x1 - 1);
        if (qx_lo > qx_hi) continue;
        const int qy = y + dy;
        std::size_t q = static_cast<std::size_t>(qy - acc.y0) * acc.stride() + (qx_lo - acc.x0);
        for (int qx = qx_lo; qx <= qx_hi; ++qx, ++q) {
          acc.weight[q] += w;
          acc.color[3 * q + 0] += c0;
          acc.color[3 * q + 1] += c1;
          acc.color[3 * q + 2] += c2;
        }
      }
    }
  }
}

void resolve(const Accumulator& acc, int width, std::vector<float>& out) {
  for (int y = acc.y0; y < acc.y1; ++y) {
    for (int x = acc.x0; x < acc.x1; ++x) {
      const std::size_t q = static_cast<std::size_t>(y - acc.y0) * acc.stride() + (x - acc.x0);
      const std::size_t o = (static_cast<std::size_t>(y) * width + x) * 3;
      const double w = acc.weight[q];
      for (int c = 0; c < 3; ++c) out[o + c] = static_cast<float>(acc.color[3 * q + c] / w);
    }
  }
}

ImagePlane finish(const Prepared& p, std::vector<float> out, const RenderParams& params,
                  ColorEncoding input_encoding) {
  if (params.gamma_aware)
    return to_gamma(ImagePlane(p.width, p.height, 3, std::move(out), ColorEncoding::Linear));
  return ImagePlane(p.width, p.height, 3, std::move(out), input_encoding);
}

}  // namespace

ImagePlane render_bokeh(const ImagePlane& aif, const DisparityMap& disp,
                        const RenderParams& params) {
  const Prepared p = prepare(aif, disp, params);
  Accumulator acc(0, 0, p.width, p.height);
  scatter_sources(p, 0, 0, p.width, p.height, acc);
  std::vector<float> out(p.color.size());
  resolve(acc, p.width, out);
  return finish(p, std::move(out), params, aif.encoding());
}

ImagePlane render_tiled(const ImagePlane& aif, const DisparityMap& disp,
                        const RenderParams& params, int tile, int workers) {
  if (tile <= 0) throw std::invalid_argument("tile size must be positive");
  const Prepared p = prepare(aif, disp, params);
  const int tiles_x = (p.width + tile - 1) / tile;
  const int tiles_y = (p.height + tile - 1) / tile;
  const int n_tiles = tiles_x * tiles_y;
  const int threads = workers > 0 ? workers : omp_get_max_threads();
  std::vector<float> out(p.color.size());

#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (int t = 0; t < n_tiles; ++t) {
    const int x0 = (t % tiles_x) * tile;
    const int y0 = (t / tiles_x) * tile;
    const int x1 = std::min(x0 + tile, p.width);
    const int y1 = std::min(y0 + tile, p.height);
    Accumulator acc(x0, y0, x1, y1);
    const int k = p.max_extent;
    scatter_sources(p, std::max(0, x0 - k), std::max(0, y0 - k), std::min(p.width, x1 + k),
                    std::min(p.height, y1 + k), acc);
    resolve(acc, p.width, out);
  }
  return finish(p, std::move(out), params, aif.encoding());
}

}  // namespace bokeh
