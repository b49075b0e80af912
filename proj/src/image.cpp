#include "bokeh/image.hpp"

#include <algorithm>
#include <cmath>

namespace bokeh {

namespace {

void check_dims(int width, int height, std::size_t expected, std::size_t got) {
  if (width <= 0 || height <= 0)
    throw std::invalid_argument("image dimensions must be positive");
  if (expected != got)
    throw std::invalid_argument("sample count " + std::to_string(got) +
                                " does not match dimensions (expected " +
                                std::to_string(expected) + ")");
}

}  // namespace

ImagePlane::ImagePlane(int width, int height, int channels, std::vector<float> data,
                       ColorEncoding encoding)
    : width_(width), height_(height), channels_(channels), encoding_(encoding),
      data_(std::move(data)) {
  if (channels != 1 && channels != 3)
    throw std::invalid_argument("image must have 1 or 3 channels");
  check_dims(width, height,
             static_cast<std::size_t>(width) * height * channels, data_.size());
  for (float& v : data_) {
    if (!std::isfinite(v)) throw std::invalid_argument("image sample is not finite");
    v = std::clamp(v, 0.0f, 1.0f);
  }
}

ImagePlane ImagePlane::filled(int width, int height, int channels, float value,
                              ColorEncoding encoding) {
  std::vector<float> data(static_cast<std::size_t>(std::max(width, 0)) *
                              std::max(height, 0) * std::max(channels, 0),
                          value);
  return ImagePlane(width, height, channels, std::move(data), encoding);
}

ImagePlane ImagePlane::with_encoding(ColorEncoding encoding) const {
  ImagePlane out = *this;
  out.encoding_ = encoding;
  return out;
}

DisparityMap::DisparityMap(int width, int height, std::vector<float> data)
    : width_(width), height_(height), data_(std::move(data)) {
  check_dims(width, height, static_cast<std::size_t>(width) * height, data_.size());
  for (float v : data_) {
    if (!std::isfinite(v)) throw std::invalid_argument("disparity value is not finite");
    if (v < 0.0f || v > 1.0f)
      throw std::invalid_argument("disparity value outside [0,1]");
  }
}

DisparityMap DisparityMap::filled(int width, int height, float value) {
  return DisparityMap(width, height,
                      std::vector<float>(static_cast<std::size_t>(std::max(width, 0)) *
                                             std::max(height, 0),
                                         value));
}

ImagePlane to_linear(const ImagePlane& img) {
  std::vector<float> out(img.data().begin(), img.data().end());
  for (float& v : out) v = static_cast<float>(std::pow(static_cast<double>(v), kGamma));
  return ImagePlane(img.width(), img.height(), img.channels(), std::move(out),
                    ColorEncoding::Linear);
}

ImagePlane to_gamma(const ImagePlane& img) {
  std::vector<float> out(img.data().begin(), img.data().end());
  for (float& v : out)
    v = static_cast<float>(std::pow(static_cast<double>(v), 1.0 / kGamma));
  return ImagePlane(img.width(), img.height(), img.channels(), std::move(out),
                    ColorEncoding::Gamma22);
}

DisparityMap normalize_disparity(int width, int height, std::span<const float> raw) {
  if (raw.empty()) throw std::invalid_argument("empty disparity map");
  for (float v : raw)
    if (!std::isfinite(v)) throw std::invalid_argument("disparity value is not finite");
  const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
  const float lo = *lo_it;
  const float hi = *hi_it;
  std::vector<float> out(raw.size());
  if (hi == lo) {
    std::fill(out.begin(), out.end(), 0.5f);
  } else {
    const float span = hi - lo;
    for (std::size_t i = 0; i < raw.size(); ++i)
      out[i] = std::clamp((raw[i] - lo) / span, 0.0f, 1.0f);
  }
  return DisparityMap(width, height, std::move(out));
}

}  // namespace bokeh
