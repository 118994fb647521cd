#include <doctest.h>

#include <cmath>

#include "derain/metrics.hpp"
#include "support.hpp"

using namespace derain;

namespace {

ImageRGB filled(int w, int h, double v) { return {ImagePlane(w, h, v), ImagePlane(w, h, v), ImagePlane(w, h, v)}; }

}  // namespace

TEST_CASE("PSNR of a constant offset has a closed form") {
  const ImageRGB a = filled(20, 20, 0.25);
  const ImageRGB b = filled(20, 20, 0.25 + 16.0 / 255.0);
  const double expected = 20.0 * std::log10(255.0 / 16.0);
  CHECK(std::abs(expected - 24.048) <= 1e-3);
  CHECK(std::abs(psnr(a, b) - expected) <= 1e-9);
  CHECK(std::abs(psnr(a, b, 2.0) - (expected + 20.0 * std::log10(2.0))) <= 1e-9);
}

TEST_CASE("PSNR of identical images is infinite") {
  const ImageRGB a = testing::random_image(9, 9, 1);
  CHECK(std::isinf(psnr(a, a)));
  CHECK(format_psnr(psnr(a, a)) == "inf");
  CHECK(format_psnr(24.04799) == "24.0480");
}

TEST_CASE("PSNR against an explicit mean squared error") {
  const ImageRGB a = testing::random_image(11, 7, 2);
  const ImageRGB b = testing::random_image(11, 7, 12);
  double se = 0.0;
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < a.r.size(); ++i) se += std::pow(a.channel(c)[i] - b.channel(c)[i], 2);
  const double mse = se / (3.0 * a.r.size());
  CHECK(psnr(a, b) == doctest::Approx(10.0 * std::log10(1.0 / mse)).epsilon(1e-12));
}

TEST_CASE("SSIM of an image with itself is exactly one") {
  const ImageRGB a = testing::random_image(24, 20, 3);
  CHECK(ssim(a, a) == 1.0);
  const ImageRGB flat = filled(16, 16, 0.4);
  CHECK(ssim(flat, flat) == 1.0);
}

TEST_CASE("SSIM matches a direct windowed evaluation") {
  const ImageRGB a = testing::random_image(22, 19, 4);
  ImageRGB b = a;
  const ImageRGB noise = testing::random_image(22, 19, 40);
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < b.r.size(); ++i) b.channel(c)[i] = 0.7 * b.channel(c)[i] + 0.3 * noise.channel(c)[i];
  double expected = 0.0;
  for (int c = 0; c < 3; ++c) expected += testing::naive_ssim_plane(a.channel(c), b.channel(c));
  expected /= 3.0;
  CHECK(std::abs(ssim(a, b) - expected) <= 1e-10);
}

TEST_CASE("metrics are symmetric") {
  const ImageRGB a = testing::random_image(30, 25, 5);
  const ImageRGB b = testing::random_image(30, 25, 6);
  CHECK(std::abs(ssim(a, b) - ssim(b, a)) <= 1e-12);
  CHECK(psnr(a, b) == psnr(b, a));
}

TEST_CASE("metrics are invariant under a horizontal flip") {
  const ImageRGB a = testing::random_image(31, 17, 7);
  const ImageRGB b = testing::random_image(31, 17, 8);
  CHECK(psnr(flip_horizontal(a), flip_horizontal(b)) == psnr(a, b));
  CHECK(std::abs(ssim(flip_horizontal(a), flip_horizontal(b)) - ssim(a, b)) <= 1e-12);
}

TEST_CASE("SSIM decreases with added noise") {
  const ImageRGB a = testing::structured_image(32, 32, 9);
  const ImageRGB noise = testing::random_image(32, 32, 90);
  double last = 1.0;
  for (double amount : {0.05, 0.1, 0.2}) {
    ImageRGB b = a;
    for (int c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < b.r.size(); ++i) b.channel(c)[i] += amount * (noise.channel(c)[i] - 0.5);
    const double s = ssim(a, b);
    CHECK(s < last);
    last = s;
  }
}

TEST_CASE("metric argument errors") {
  const ImageRGB a = testing::random_image(12, 12, 1);
  const ImageRGB b = testing::random_image(13, 12, 1);
  CHECK_THROWS_AS(psnr(a, b), Error);
  CHECK_THROWS_AS(ssim(a, b), Error);
  const ImageRGB tiny = testing::random_image(8, 8, 1);
  CHECK_THROWS_AS(ssim(tiny, tiny), Error);
  SsimParams p;
  p.sigma = 0.0;
  CHECK_THROWS_AS(ssim(a, a, p), Error);
}
