#pragma once

#include <string>

#include "derain/image.hpp"

namespace derain {

struct SsimParams {
  int radius = 5;  // 11x11 window
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double peak = 1.0;

  void validate() const;
};

/// Peak signal-to-noise ratio in dB over all channels and pixels. Identical
/// inputs give +infinity.
double psnr(const ImageRGB& a, const ImageRGB& b, double peak = 1.0);

/// Mean SSIM over the valid region of each channel, averaged across channels.
double ssim(const ImageRGB& a, const ImageRGB& b, const SsimParams& params = {});

/// "inf" for an infinite PSNR, otherwise the value with four decimals.
std::string format_psnr(double value);

}  // namespace derain
