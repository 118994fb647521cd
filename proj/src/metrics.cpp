#include "derain/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <vector>

namespace derain {

namespace {

// Row sum accumulated in mirrored pairs so a horizontally flipped row yields
// the same bits.
double mirrored_row_sum(std::span<const double> row) {
  const std::size_t n = row.size();
  double sum = 0.0;
  for (std::size_t x = 0; x < n / 2; ++x) sum += row[x] + row[n - 1 - x];
  if (n % 2 == 1) sum += row[n / 2];
  return sum;
}

std::vector<double> gaussian_taps(int radius, double sigma) {
  std::vector<double> taps(2 * radius + 1);
  double total = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    taps[k + radius] = std::exp(-(k * k) / (2.0 * sigma * sigma));
    total += taps[k + radius];
  }
  for (double& t : taps) t /= total;
  return taps;
}

// Valid-region separable gaussian filter. Taps at +/-k are applied to the
// pair sum, keeping the result flip-symmetric.
ImagePlane gaussian_valid(const ImagePlane& src, const std::vector<double>& taps, int radius) {
  const int w = src.width();
  const int h = src.height();
  const int ow = w - 2 * radius;
  const int oh = h - 2 * radius;
  ImagePlane horiz(ow, h);
  for (int y = 0; y < h; ++y) {
    const auto in = src.row(y);
    auto out = horiz.row(y);
    for (int x = 0; x < ow; ++x) {
      const int c = x + radius;
      double acc = taps[radius] * in[c];
      for (int k = 1; k <= radius; ++k) acc += taps[radius + k] * (in[c - k] + in[c + k]);
      out[x] = acc;
    }
  }
  ImagePlane out(ow, oh);
  for (int y = 0; y < oh; ++y) {
    const int c = y + radius;
    for (int x = 0; x < ow; ++x) {
      double acc = taps[radius] * horiz(x, c);
      for (int k = 1; k <= radius; ++k) acc += taps[radius + k] * (horiz(x, c - k) + horiz(x, c + k));
      out(x, y) = acc;
    }
  }
  return out;
}

double ssim_channel(const ImagePlane& x, const ImagePlane& y, const SsimParams& p,
                    const std::vector<double>& taps) {
  const double c1 = (p.k1 * p.peak) * (p.k1 * p.peak);
  const double c2 = (p.k2 * p.peak) * (p.k2 * p.peak);
  const ImagePlane mx = gaussian_valid(x, taps, p.radius);
  const ImagePlane my = gaussian_valid(y, taps, p.radius);
  const ImagePlane mxx = gaussian_valid(multiply(x, x), taps, p.radius);
  const ImagePlane myy = gaussian_valid(multiply(y, y), taps, p.radius);
  const ImagePlane mxy = gaussian_valid(multiply(x, y), taps, p.radius);
  ImagePlane map(mx.width(), mx.height());
  for (std::size_t i = 0; i < map.size(); ++i) {
    const double vx = mxx[i] - mx[i] * mx[i];
    const double vy = myy[i] - my[i] * my[i];
    const double cxy = mxy[i] - mx[i] * my[i];
    const double num = (2.0 * mx[i] * my[i] + c1) * (2.0 * cxy + c2);
    const double den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2);
    map[i] = num / den;
  }
  double total = 0.0;
  for (int r = 0; r < map.height(); ++r) total += mirrored_row_sum(map.row(r));
  return total / static_cast<double>(map.size());
}

}  // namespace

void SsimParams::validate() const {
  if (radius < 1) throw Error("ssim window radius must be >= 1");
  if (!(sigma > 0 && k1 > 0 && k2 > 0 && peak > 0)) throw Error("ssim constants must be positive");
}

double psnr(const ImageRGB& a, const ImageRGB& b, double peak) {
  if (!a.same_shape(b)) throw Error("psnr: dimension mismatch");
  if (!(peak > 0)) throw Error("psnr: peak must be positive");
  double sum = 0.0;
  std::vector<double> sq(static_cast<std::size_t>(a.width()));
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < a.height(); ++y) {
      const auto ra = a.channel(c).row(y);
      const auto rb = b.channel(c).row(y);
      for (std::size_t x = 0; x < sq.size(); ++x) {
        const double d = ra[x] - rb[x];
        sq[x] = d * d;
      }
      sum += mirrored_row_sum(sq);
    }
  const double mse = sum / (3.0 * static_cast<double>(a.r.size()));
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const ImageRGB& a, const ImageRGB& b, const SsimParams& params) {
  params.validate();
  if (!a.same_shape(b)) throw Error("ssim: dimension mismatch");
  const int window = 2 * params.radius + 1;
  if (a.width() < window || a.height() < window) throw Error("ssim: image smaller than the window");
  const auto taps = gaussian_taps(params.radius, params.sigma);
  double total = 0.0;
  for (int c = 0; c < 3; ++c) total += ssim_channel(a.channel(c), b.channel(c), params, taps);
  return total / 3.0;
}

std::string format_psnr(double value) {
  if (std::isinf(value)) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", value);
  return buf;
}

}  // namespace derain
