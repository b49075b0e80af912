#include "doctest.h"

#include <cmath>
#include <random>

#include "bokeh/render.hpp"
#include "support.hpp"

using namespace bokeh;

namespace {

bool identical(const ImagePlane& a, const ImagePlane& b) {
  return a.same_shape(b) && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

RenderParams params(double df, double alpha, bool gamma = true) {
  RenderParams p;
  p.focal_disparity = df;
  p.intensity = alpha;
  p.gamma_aware = gamma;
  return p;
}

// Mean of linear-light colors within radius r of (x, y): a gather-side disc
// convolution, written without reference to the scatter code.
double disc_mean(const ImagePlane& lin, int x, int y, int c, double r) {
  double sum = 0;
  int n = 0;
  const int R = static_cast<int>(std::ceil(r));
  for (int dy = -R; dy <= R; ++dy)
    for (int dx = -R; dx <= R; ++dx) {
      if (dx * dx + dy * dy > r * r) continue;
      sum += lin.at(x + dx, y + dy, c);
      ++n;
    }
  return sum / n;
}

}  // namespace

TEST_SUITE("render") {

TEST_CASE("blur radius") {
  CHECK(blur_radius(0.8, params(0.8, 30)) == 0.0);
  CHECK(blur_radius(0.5, params(0.0, 10)) == 5.0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 100; ++i) {
    const double d = u(rng), df = u(rng), a = 60 * u(rng);
    CHECK(blur_radius(d, params(df, a)) == a * std::abs(d - df));
  }
}

TEST_CASE("parameter and input validation") {
  const ImagePlane img = ImagePlane::filled(4, 4, 3, 0.5f);
  const DisparityMap d = DisparityMap::filled(4, 4, 0.5f);
  CHECK_THROWS(render_bokeh(img, d, params(1.5, 10)));
  CHECK_THROWS(render_bokeh(img, d, params(0.5, -1)));
  RenderParams neg = params(0.5, 1);
  neg.occlusion_beta = -1;
  CHECK_THROWS(render_bokeh(img, d, neg));
  CHECK_THROWS(render_bokeh(img, DisparityMap::filled(4, 5, 0.5f), params(0.5, 1)));
  CHECK_THROWS(render_bokeh(ImagePlane::filled(4, 4, 1, 0.5f), d, params(0.5, 1)));
}

TEST_CASE("zero intensity is the identity") {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 5; ++k) {
    const ImagePlane img = testing_support::random_image(rng, 33, 21);
    const DisparityMap d = testing_support::random_disparity(rng, 33, 21);
    for (bool gamma : {true, false}) {
      CHECK(identical(render_bokeh(img, d, params(0.3, 0, gamma)), img));
      CHECK(identical(render_tiled(img, d, params(0.3, 0, gamma), 8), img));
    }
  }
}

TEST_CASE("uniform field is conserved") {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 4; ++k) {
    const float v = 0.1f + 0.2f * k;
    const ImagePlane img = ImagePlane::filled(40, 30, 3, v);
    const DisparityMap d = testing_support::structured_disparity(rng, 40, 30);
    const ImagePlane out = render_tiled(img, d, params(0.5, 7.0 * (k + 1)), 16);
    for (float s : out.data()) CHECK(std::abs(s - v) <= 1e-5);
  }
}

TEST_CASE("tiled renders are bit-identical to the serial reference") {
  std::mt19937_64 rng(4);
  const ImagePlane img = testing_support::random_image(rng, 128, 128);
  const DisparityMap d = testing_support::structured_disparity(rng, 128, 128);
  const RenderParams p = params(0.4, 12);
  const ImagePlane ref = render_bokeh(img, d, p);
  CHECK(identical(render_tiled(img, d, p, 64), ref));
  CHECK(identical(render_tiled(img, d, p, 128), ref));
  CHECK(identical(render_tiled(img, d, p, 1000), ref));
  CHECK(identical(render_tiled(img, d, p, 7), ref));
  CHECK(identical(render_tiled(img, d, p, 32, 1), ref));
  CHECK(identical(render_tiled(img, d, p, 32, 3), ref));
  CHECK(identical(render_bokeh(img, d, p), ref));
}

TEST_CASE("background interior matches a disc convolution") {
  std::mt19937_64 rng(5);
  const int w = 96, h = 96;
  const ImagePlane img = testing_support::random_image(rng, w, h);
  std::vector<float> dv(static_cast<std::size_t>(w) * h, 0.1f);
  const int cx = 20, cy = 20, cr = 10;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= cr * cr) dv[static_cast<std::size_t>(y) * w + x] = 0.9f;
  const DisparityMap d(w, h, dv);
  const double alpha = 10;
  const double r = alpha * std::abs(double(0.1f) - double(0.9f));
  const ImagePlane out = render_bokeh(img, d, params(0.9f, alpha));
  const ImagePlane lin = to_linear(img);
  const int R = static_cast<int>(std::ceil(r));
  double err = 0;
  int n = 0;
  for (int y = R; y < h - R; ++y)
    for (int x = R; x < w - R; ++x) {
      const double dist = std::hypot(x - cx, y - cy);
      if (dist <= cr + r + 1) continue;
      for (int c = 0; c < 3; ++c) {
        const double expect = std::pow(disc_mean(lin, x, y, c, r), 1.0 / kGamma);
        err += std::abs(expect - out.at(x, y, c));
        ++n;
      }
    }
  REQUIRE(n > 1000);
  CHECK(err / n <= 2.0 / 255);

  // in-focus pixels farther than r from any background pixel keep their color
  int kept = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (std::hypot(x - cx, y - cy) + r >= cr) continue;
      ++kept;
      for (int c = 0; c < 3; ++c) CHECK(std::abs(out.at(x, y, c) - img.at(x, y, c)) <= 1e-5);
    }
  CHECK(kept > 0);
}

TEST_CASE("front layer dominates at its boundary") {
  const int w = 48, h = 16;
  std::vector<float> rgb(static_cast<std::size_t>(w) * h * 3), dv(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const bool front = x < w / 2;
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      for (int c = 0; c < 3; ++c) rgb[3 * i + c] = front ? 1.0f : 0.0f;
      dv[i] = front ? 1.0f : 0.0f;
    }
  const ImagePlane img(w, h, 3, rgb);
  const DisparityMap d(w, h, dv);
  // focus on the back: the blurred front spills over the sharp back plane
  const ImagePlane out = render_bokeh(img, d, params(0.0, 6));
  CHECK(out.at(w / 2 + 2, h / 2, 0) > 0.5f);
}

TEST_CASE("blur width grows with intensity") {
  const int w = 80, h = 8;
  std::vector<float> rgb(static_cast<std::size_t>(w) * h * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) rgb[(static_cast<std::size_t>(y) * w + x) * 3 + c] = x < w / 2 ? 0.f : 1.f;
  const ImagePlane img(w, h, 3, rgb);
  const DisparityMap d = DisparityMap::filled(w, h, 0.2f);
  int previous = 0;
  for (double alpha : {0.0, 2.0, 4.0, 8.0, 16.0, 24.0}) {
    const ImagePlane out = render_bokeh(img, d, params(1.0, alpha, false));
    int width = 0;
    for (int x = 0; x < w; ++x) {
      const float v = out.at(x, h / 2, 0);
      if (v > 0.1f && v < 0.9f) ++width;
    }
    CHECK(width >= previous);
    previous = width;
  }
  CHECK(previous > 8);
}

}
