#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bokeh {

/// Thrown for file-system and codec failures (missing file, bad format).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ColorEncoding { Linear, Gamma22 };

/// Row-major H x W x C raster with samples in [0,1].
///
/// Immutable after construction. The constructor rejects non-finite samples
/// and clamps the rest into [0,1].
class ImagePlane {
 public:
  ImagePlane() = default;
  ImagePlane(int width, int height, int channels, std::vector<float> data,
             ColorEncoding encoding = ColorEncoding::Gamma22);

  static ImagePlane filled(int width, int height, int channels, float value,
                           ColorEncoding encoding = ColorEncoding::Gamma22);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  ColorEncoding encoding() const { return encoding_; }
  bool empty() const { return data_.empty(); }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }

  std::span<const float> data() const { return data_; }
  float at(int x, int y, int c) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  ImagePlane with_encoding(ColorEncoding encoding) const;

  bool same_shape(const ImagePlane& other) const {
    return width_ == other.width_ && height_ == other.height_ &&
           channels_ == other.channels_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  ColorEncoding encoding_ = ColorEncoding::Gamma22;
  std::vector<float> data_;
};

/// Row-major H x W normalized disparity, 1 = nearest.
class DisparityMap {
 public:
  DisparityMap() = default;
  DisparityMap(int width, int height, std::vector<float> data);

  static DisparityMap filled(int width, int height, float value);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }
  std::span<const float> data() const { return data_; }
  float at(int x, int y) const {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }

  bool matches(const ImagePlane& img) const {
    return width_ == img.width() && height_ == img.height();
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

inline constexpr double kGamma = 2.2;

/// x -> x^2.2 per sample; result tagged Linear.
ImagePlane to_linear(const ImagePlane& img);
/// x -> x^(1/2.2) per sample; result tagged Gamma22.
ImagePlane to_gamma(const ImagePlane& img);

/// Min-max normalization shared by every disparity loader. Constant inputs
/// map to 0.5. Throws on non-finite values.
DisparityMap normalize_disparity(int width, int height, std::span<const float> raw);

}  // namespace bokeh
