#include "doctest.h"

#include <cmath>
#include <random>

#include "bokeh/metrics.hpp"
#include "oracles/ssim_reference.hpp"
#include "support.hpp"

using namespace bokeh;

namespace {

ImagePlane add_noise(const ImagePlane& img, double amplitude, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<float> v(img.data().begin(), img.data().end());
  for (float& x : v) x = static_cast<float>(std::clamp(x + amplitude * u(rng), 0.0, 1.0));
  return ImagePlane(img.width(), img.height(), img.channels(), v);
}

ImagePlane step_image(int w, int h, int edge_x) {
  std::vector<float> v(static_cast<std::size_t>(w) * h * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) v[(static_cast<std::size_t>(y) * w + x) * 3 + c] = x < edge_x ? 0.f : 1.f;
  return ImagePlane(w, h, 3, v);
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("psnr") {
  std::mt19937_64 rng(1);
  const ImagePlane a = testing_support::random_image(rng, 20, 20);
  CHECK(psnr(a, a) == kPsnrCap);
  const ImagePlane z = ImagePlane::filled(10, 10, 1, 0.0f);
  const ImagePlane o = ImagePlane::filled(10, 10, 1, 0.1f);
  CHECK(psnr(z, o) == doctest::Approx(20.0).epsilon(1e-6));
  const ImagePlane b = testing_support::random_image(rng, 20, 20);
  CHECK(psnr(a, b) == psnr(b, a));
  const EdgeMask full = EdgeMask::full(20, 20);
  CHECK(psnr(a, b, &full) == psnr(a, b));
  CHECK_THROWS(psnr(a, z));
  const EdgeMask empty{20, 20, std::vector<std::uint8_t>(400, 0)};
  CHECK_THROWS(psnr(a, b, &empty));
}

TEST_CASE("psnr decreases with noise amplitude") {
  std::mt19937_64 rng(2);
  const ImagePlane a = ImagePlane::filled(32, 32, 3, 0.5f);
  double prev = kPsnrCap + 1;
  for (double amp : {0.01, 0.02, 0.05, 0.1, 0.2}) {
    const double p = psnr(a, add_noise(a, amp, 3));
    CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("ssim identities") {
  std::mt19937_64 rng(3);
  const ImagePlane a = testing_support::random_image(rng, 24, 19);
  const ImagePlane b = testing_support::random_image(rng, 24, 19);
  CHECK(ssim(a, a) == 1.0);
  CHECK(std::abs(ssim(a, b) - ssim(b, a)) <= 1e-6);
  const EdgeMask full = EdgeMask::full(24, 19);
  CHECK(ssim(a, b, &full) == ssim(a, b));
  CHECK_THROWS(ssim(ImagePlane::filled(10, 20, 3, 0.f), ImagePlane::filled(10, 20, 3, 0.f)));
}

TEST_CASE("ssim of constant images has a closed form") {
  const double x = 0.2, y = 0.8, c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const double expect = (2 * x * y + c1) * c2 / ((x * x + y * y + c1) * c2);
  const double got = ssim(ImagePlane::filled(16, 16, 3, 0.2f), ImagePlane::filled(16, 16, 3, 0.8f));
  CHECK(got == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("ssim matches the reference implementation") {
  for (int k = 0; k < oracle::kSsimPairs; ++k) {
    const auto p = testing_support::oracle_pair(k);
    INFO("pair " << k);
    CHECK(std::abs(ssim(p.a, p.b) - oracle::kSsimReference[k]) <= 1e-4);
  }
}

TEST_CASE("edge mask on a step edge") {
  const int w = 40, h = 12, edge = 20;
  const ImagePlane img = step_image(w, h, edge);
  const EdgeMask raw = edge_mask(img, {0.15, 0});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) CHECK(raw.at(x, y) == (x == edge - 1 || x == edge));
  const EdgeMask dil = edge_mask(img, {0.15, 4});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) CHECK(dil.at(x, y) == (x >= edge - 1 - 4 && x <= edge + 4));
  CHECK(edge_mask(ImagePlane::filled(16, 16, 3, 0.3f)).count() == 0);
}

TEST_CASE("score pair uses the reference mask") {
  const ImagePlane ref = step_image(32, 16, 16);
  const ImagePlane blank = ImagePlane::filled(32, 16, 3, 0.5f);
  const QualityScores s = score_pair(blank, ref);
  CHECK(s.psnr_eg < s.psnr + 1e-9);
  CHECK_THROWS(score_pair(ref, blank));
  const QualityScores l = score_pair_lenient(ref, blank);
  CHECK_FALSE(l.has_edges);
  CHECK(std::isnan(l.psnr_eg));
  const ScoreSummary sum = summarize({s, l});
  CHECK(sum.images == 2);
  CHECK(sum.edge_images == 1);
  CHECK(sum.mean.psnr_eg == s.psnr_eg);
}

}
