#pragma once

#include <memory>
#include <string>

#include "bokeh/flow.hpp"
#include "bokeh/image.hpp"

namespace bokeh {

/// Maps images to latents and back. The flow network only ever sees latents.
class LatentCodec {
 public:
  virtual ~LatentCodec() = default;
  virtual Latent encode(const ImagePlane& img) const = 0;
  /// Decoded samples are clamped into [0,1] and tagged Gamma22.
  virtual ImagePlane decode(const Latent& z) const = 0;
  virtual std::string name() const = 0;
  /// Latent shape for an image of the given size and channel count.
  virtual void latent_shape(int width, int height, int channels, int& lh, int& lw, int& lc) const = 0;
};

/// Pixel space: the latent is the image itself.
class IdentityCodec final : public LatentCodec {
 public:
  Latent encode(const ImagePlane& img) const override;
  ImagePlane decode(const Latent& z) const override;
  std::string name() const override { return "identity"; }
  void latent_shape(int width, int height, int channels, int& lh, int& lw, int& lc) const override;
};

/// k x k average-pool encoder with a bilinear (half-pixel centered) decoder.
class PoolCodec final : public LatentCodec {
 public:
  explicit PoolCodec(int factor);
  Latent encode(const ImagePlane& img) const override;
  ImagePlane decode(const Latent& z) const override;
  std::string name() const override { return "pool" + std::to_string(factor_); }
  void latent_shape(int width, int height, int channels, int& lh, int& lw, int& lc) const override;
  int factor() const { return factor_; }

 private:
  int factor_;
};

/// "identity" or "pool<k>" (e.g. "pool4").
std::unique_ptr<LatentCodec> make_codec(const std::string& name);

}  // namespace bokeh
