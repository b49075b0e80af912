#pragma once

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "bokeh/image.hpp"
#include "bokeh/rng.hpp"

namespace testing_support {

/// Same stream as tests/oracles/gen_ssim_reference.py.
inline double oracle_unit(std::uint64_t seed, std::uint64_t i) {
  return static_cast<double>(bokeh::splitmix64(seed * 1000003ULL + i) >> 11) * 0x1.0p-53;
}

struct OraclePair {
  bokeh::ImagePlane a;
  bokeh::ImagePlane b;
};

inline OraclePair oracle_pair(int k) {
  const int w = 16 + (k * 7) % 25;
  const int h = 16 + (k * 11) % 23;
  const double mix = 0.3 + 0.6 * k / 19.0;
  const std::size_t n = static_cast<std::size_t>(w) * h * 3;
  std::vector<float> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = static_cast<float>(oracle_unit(2 * k + 1, i));
    const double noise = oracle_unit(2 * k + 2, i);
    b[i] = static_cast<float>((1.0 - mix) * static_cast<double>(a[i]) + mix * noise);
  }
  return {bokeh::ImagePlane(w, h, 3, std::move(a)), bokeh::ImagePlane(w, h, 3, std::move(b))};
}

inline bokeh::ImagePlane random_image(std::mt19937_64& rng, int w, int h, int c = 3) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> v(static_cast<std::size_t>(w) * h * c);
  for (float& x : v) x = u(rng);
  return bokeh::ImagePlane(w, h, c, std::move(v));
}

inline bokeh::DisparityMap random_disparity(std::mt19937_64& rng, int w, int h) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> v(static_cast<std::size_t>(w) * h);
  for (float& x : v) x = u(rng);
  return bokeh::DisparityMap(w, h, std::move(v));
}

/// Smooth random disparity: a few random planes blended, then blocky steps.
inline bokeh::DisparityMap structured_disparity(std::mt19937_64& rng, int w, int h) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double ax = u(rng), ay = u(rng), c0 = u(rng);
  const int step = 4 + static_cast<int>(u(rng) * 12);
  std::vector<float> v(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double d = c0 + ax * (x / step) * step / w - ay * (y / step) * step / h;
      d -= std::floor(d);
      v[static_cast<std::size_t>(y) * w + x] = static_cast<float>(d);
    }
  return bokeh::DisparityMap(w, h, std::move(v));
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("bokeh-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing_support
