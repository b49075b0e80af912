#include "bokeh/codec.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bokeh {

Latent IdentityCodec::encode(const ImagePlane& img) const {
  return Latent(img.height(), img.width(), img.channels(),
                std::vector<double>(img.data().begin(), img.data().end()));
}

ImagePlane IdentityCodec::decode(const Latent& z) const {
  std::vector<float> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i)
    out[i] = static_cast<float>(std::clamp(z.data[i], 0.0, 1.0));
  return ImagePlane(z.width, z.height, z.channels, std::move(out), ColorEncoding::Gamma22);
}

void IdentityCodec::latent_shape(int width, int height, int channels, int& lh, int& lw,
                                 int& lc) const {
  lh = height;
  lw = width;
  lc = channels;
}

PoolCodec::PoolCodec(int factor) : factor_(factor) {
  if (factor < 1) throw std::invalid_argument("pool factor must be >= 1");
}

void PoolCodec::latent_shape(int width, int height, int channels, int& lh, int& lw,
                             int& lc) const {
  if (width % factor_ != 0 || height % factor_ != 0)
    throw std::invalid_argument("image size must be a multiple of the pool factor");
  lh = height / factor_;
  lw = width / factor_;
  lc = channels;
}

Latent PoolCodec::encode(const ImagePlane& img) const {
  int lh, lw, lc;
  latent_shape(img.width(), img.height(), img.channels(), lh, lw, lc);
  Latent z(lh, lw, lc);
  const double norm = 1.0 / (factor_ * factor_);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < lc; ++c) z.at(y / factor_, x / factor_, c) += img.at(x, y, c) * norm;
  return z;
}

ImagePlane PoolCodec::decode(const Latent& z) const {
  const int w = z.width * factor_;
  const int h = z.height * factor_;
  std::vector<float> out(static_cast<std::size_t>(w) * h * z.channels);
  for (int y = 0; y < h; ++y) {
    const double fy = std::clamp((y + 0.5) / factor_ - 0.5, 0.0, z.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, z.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < w; ++x) {
      const double fx = std::clamp((x + 0.5) / factor_ - 0.5, 0.0, z.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, z.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < z.channels; ++c) {
        const double v = (1 - wy) * ((1 - wx) * z.at(y0, x0, c) + wx * z.at(y0, x1, c)) +
                         wy * ((1 - wx) * z.at(y1, x0, c) + wx * z.at(y1, x1, c));
        out[(static_cast<std::size_t>(y) * w + x) * z.channels + c] =
            static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return ImagePlane(w, h, z.channels, std::move(out), ColorEncoding::Gamma22);
}

std::unique_ptr<LatentCodec> make_codec(const std::string& name) {
  if (name == "identity") return std::make_unique<IdentityCodec>();
  if (name.rfind("pool", 0) == 0 && name.size() > 4) {
    const int factor = std::stoi(name.substr(4));
    return std::make_unique<PoolCodec>(factor);
  }
  throw std::invalid_argument("unknown latent codec '" + name + "'");
}

}  // namespace bokeh
