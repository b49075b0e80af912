#include "bokeh/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace bokeh {

std::size_t EdgeMask::count() const {
  return static_cast<std::size_t>(std::count(data.begin(), data.end(), std::uint8_t{1}));
}

EdgeMask EdgeMask::full(int width, int height) {
  return EdgeMask{width, height,
                  std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height, 1)};
}

namespace {

void require_same_shape(const ImagePlane& a, const ImagePlane& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("images differ in shape");
  if (a.empty()) throw std::invalid_argument("empty image");
}

void require_mask(const EdgeMask* mask, const ImagePlane& img) {
  if (!mask) return;
  if (mask->width != img.width() || mask->height != img.height())
    throw std::invalid_argument("mask dimensions differ from the image");
  if (mask->count() == 0) throw std::invalid_argument("edge mask is empty");
}

// scipy.ndimage "reflect": (d c b a | a b c d | d c b a)
int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

std::vector<double> gaussian_taps(const SsimParams& p) {
  std::vector<double> taps(static_cast<std::size_t>(2 * p.radius + 1));
  for (int k = -p.radius; k <= p.radius; ++k)
    taps[k + p.radius] = std::exp(-0.5 * k * k / (p.sigma * p.sigma));
  const double sum = std::accumulate(taps.begin(), taps.end(), 0.0);
  for (double& t : taps) t /= sum;
  return taps;
}

std::vector<double> gaussian_filter(const std::vector<double>& src, int w, int h,
                                    const std::vector<double>& taps) {
  const int r = static_cast<int>(taps.size() / 2);
  std::vector<double> tmp(src.size());
  std::vector<double> out(src.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -r; k <= r; ++k) acc += taps[k + r] * src[static_cast<std::size_t>(y) * w + reflect(x + k, w)];
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -r; k <= r; ++k) acc += taps[k + r] * tmp[static_cast<std::size_t>(reflect(y + k, h)) * w + x];
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  return out;
}

}  // namespace

double psnr(const ImagePlane& a, const ImagePlane& b, const EdgeMask* mask) {
  require_same_shape(a, b);
  require_mask(mask, a);
  const int c = a.channels();
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t p = 0; p < a.pixel_count(); ++p) {
    if (mask && !mask->data[p]) continue;
    for (int k = 0; k < c; ++k) {
      const double d = static_cast<double>(a.data()[p * c + k]) - b.data()[p * c + k];
      sum += d * d;
    }
    n += static_cast<std::size_t>(c);
  }
  const double mse = sum / static_cast<double>(n);
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

std::vector<double> ssim_map(const ImagePlane& a, const ImagePlane& b, const SsimParams& params) {
  require_same_shape(a, b);
  const int w = a.width();
  const int h = a.height();
  const int window = 2 * params.radius + 1;
  if (w < window || h < window)
    throw std::invalid_argument("image is smaller than the SSIM window");
  const auto taps = gaussian_taps(params);
  const double c1 = params.k1 * params.k1;
  const double c2 = params.k2 * params.k2;
  const int nc = a.channels();
  const std::size_t n = a.pixel_count();
  std::vector<double> map(n, 0.0);
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (int ch = 0; ch < nc; ++ch) {
    for (std::size_t p = 0; p < n; ++p) {
      x[p] = a.data()[p * nc + ch];
      y[p] = b.data()[p * nc + ch];
      xx[p] = x[p] * x[p];
      yy[p] = y[p] * y[p];
      xy[p] = x[p] * y[p];
    }
    const auto ux = gaussian_filter(x, w, h, taps);
    const auto uy = gaussian_filter(y, w, h, taps);
    const auto uxx = gaussian_filter(xx, w, h, taps);
    const auto uyy = gaussian_filter(yy, w, h, taps);
    const auto uxy = gaussian_filter(xy, w, h, taps);
    for (std::size_t p = 0; p < n; ++p) {
      const double vx = uxx[p] - ux[p] * ux[p];
      const double vy = uyy[p] - uy[p] * uy[p];
      const double vxy = uxy[p] - ux[p] * uy[p];
      const double num = (2 * ux[p] * uy[p] + c1) * (2 * vxy + c2);
      const double den = (ux[p] * ux[p] + uy[p] * uy[p] + c1) * (vx + vy + c2);
      map[p] += num / den;
    }
  }
  for (double& v : map) v /= nc;
  return map;
}

double ssim(const ImagePlane& a, const ImagePlane& b, const EdgeMask* mask,
            const SsimParams& params) {
  require_same_shape(a, b);
  require_mask(mask, a);
  const auto map = ssim_map(a, b, params);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t p = 0; p < map.size(); ++p) {
    if (mask && !mask->data[p]) continue;
    sum += map[p];
    ++n;
  }
  return sum / static_cast<double>(n);
}

std::vector<double> luma(const ImagePlane& img) {
  std::vector<double> out(img.pixel_count());
  const int c = img.channels();
  for (std::size_t p = 0; p < out.size(); ++p) {
    if (c == 1)
      out[p] = img.data()[p];
    else
      out[p] = 0.299 * img.data()[p * 3] + 0.587 * img.data()[p * 3 + 1] +
               0.114 * img.data()[p * 3 + 2];
  }
  return out;
}

std::vector<double> sobel_magnitude(const ImagePlane& img) {
  const auto l = luma(img);
  const int w = img.width();
  const int h = img.height();
  auto at = [&](int x, int y) {
    x = std::clamp(x, 0, w - 1);
    y = std::clamp(y, 0, h - 1);
    return l[static_cast<std::size_t>(y) * w + x];
  };
  std::vector<double> out(l.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double gx = (at(x + 1, y - 1) + 2 * at(x + 1, y) + at(x + 1, y + 1)) -
                        (at(x - 1, y - 1) + 2 * at(x - 1, y) + at(x - 1, y + 1));
      const double gy = (at(x - 1, y + 1) + 2 * at(x, y + 1) + at(x + 1, y + 1)) -
                        (at(x - 1, y - 1) + 2 * at(x, y - 1) + at(x + 1, y - 1));
      out[static_cast<std::size_t>(y) * w + x] = std::sqrt(gx * gx + gy * gy);
    }
  return out;
}

EdgeMask edge_mask(const ImagePlane& reference, const EdgeMaskParams& params) {
  if (params.dilation_radius < 0) throw std::invalid_argument("dilation radius must be >= 0");
  const auto mag = sobel_magnitude(reference);
  const int w = reference.width();
  const int h = reference.height();
  EdgeMask raw{w, h, std::vector<std::uint8_t>(mag.size(), 0)};
  for (std::size_t p = 0; p < mag.size(); ++p) raw.data[p] = mag[p] > params.threshold ? 1 : 0;
  const int r = params.dilation_radius;
  if (r == 0) return raw;
  EdgeMask out{w, h, std::vector<std::uint8_t>(mag.size(), 0)};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!raw.at(x, y)) continue;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          if (dx * dx + dy * dy > r * r) continue;
          const int qx = x + dx;
          const int qy = y + dy;
          if (qx < 0 || qy < 0 || qx >= w || qy >= h) continue;
          out.data[static_cast<std::size_t>(qy) * w + qx] = 1;
        }
    }
  return out;
}

QualityScores score_pair(const ImagePlane& prediction, const ImagePlane& reference,
                         const EdgeMaskParams& mask_params, const SsimParams& ssim_params) {
  const EdgeMask mask = edge_mask(reference, mask_params);
  QualityScores s;
  s.psnr = psnr(prediction, reference);
  s.ssim = ssim(prediction, reference, nullptr, ssim_params);
  s.psnr_eg = psnr(prediction, reference, &mask);
  s.ssim_eg = ssim(prediction, reference, &mask, ssim_params);
  return s;
}

QualityScores score_pair_lenient(const ImagePlane& prediction, const ImagePlane& reference,
                                 const EdgeMaskParams& mask_params, const SsimParams& ssim_params) {
  const EdgeMask mask = edge_mask(reference, mask_params);
  if (mask.count() > 0) return score_pair(prediction, reference, mask_params, ssim_params);
  QualityScores s;
  s.psnr = psnr(prediction, reference);
  s.ssim = ssim(prediction, reference, nullptr, ssim_params);
  s.psnr_eg = s.ssim_eg = std::numeric_limits<double>::quiet_NaN();
  s.has_edges = false;
  return s;
}

ScoreSummary summarize(const std::vector<QualityScores>& scores) {
  ScoreSummary out;
  out.images = scores.size();
  QualityScores& m = out.mean;
  for (const auto& s : scores) {
    m.psnr += s.psnr;
    m.ssim += s.ssim;
    if (!s.has_edges) continue;
    m.psnr_eg += s.psnr_eg;
    m.ssim_eg += s.ssim_eg;
    ++out.edge_images;
  }
  if (out.images > 0) {
    m.psnr /= static_cast<double>(out.images);
    m.ssim /= static_cast<double>(out.images);
  }
  if (out.edge_images > 0) {
    m.psnr_eg /= static_cast<double>(out.edge_images);
    m.ssim_eg /= static_cast<double>(out.edge_images);
  } else {
    m.psnr_eg = m.ssim_eg = std::numeric_limits<double>::quiet_NaN();
    m.has_edges = false;
  }
  return out;
}

}  // namespace bokeh
