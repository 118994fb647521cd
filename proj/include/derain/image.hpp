#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace derain {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ImageIoError : public Error {
 public:
  enum class Kind { kUnreadable, kUnsupportedFormat, kZeroDimension, kUnwritable };
  ImageIoError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Single channel grid of doubles, row-major.
class ImagePlane {
 public:
  ImagePlane() = default;
  ImagePlane(int width, int height, double fill = 0.0);
  ImagePlane(int width, int height, std::vector<double> samples);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }

  double& operator()(int x, int y) { return samples_[static_cast<std::size_t>(y) * width_ + x]; }
  double operator()(int x, int y) const {
    return samples_[static_cast<std::size_t>(y) * width_ + x];
  }
  double& operator[](std::size_t i) { return samples_[i]; }
  double operator[](std::size_t i) const { return samples_[i]; }

  std::span<double> row(int y) {
    return {samples_.data() + static_cast<std::size_t>(y) * width_, static_cast<std::size_t>(width_)};
  }
  std::span<const double> row(int y) const {
    return {samples_.data() + static_cast<std::size_t>(y) * width_, static_cast<std::size_t>(width_)};
  }

  std::span<double> samples() { return samples_; }
  std::span<const double> samples() const { return samples_; }

  bool same_shape(const ImagePlane& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }
  bool all_finite() const;

  bool operator==(const ImagePlane&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> samples_;
};

struct ImageRGB {
  ImagePlane r, g, b;

  ImageRGB() = default;
  ImageRGB(int width, int height, double fill = 0.0)
      : r(width, height, fill), g(width, height, fill), b(width, height, fill) {}
  ImageRGB(ImagePlane red, ImagePlane green, ImagePlane blue);

  int width() const { return r.width(); }
  int height() const { return r.height(); }

  ImagePlane& channel(int c) { return c == 0 ? r : (c == 1 ? g : b); }
  const ImagePlane& channel(int c) const { return c == 0 ? r : (c == 1 ? g : b); }

  bool same_shape(const ImageRGB& other) const { return r.same_shape(other.r); }

  bool operator==(const ImageRGB&) const = default;
};

/// Prefix-sum table with a zero guard row and column:
/// at(x, y) = sum of source samples in rows < y, columns < x.
class IntegralTable {
 public:
  explicit IntegralTable(const ImagePlane& plane);

  double at(int x, int y) const { return table_[static_cast<std::size_t>(y) * stride_ + x]; }

  /// Sum over the inclusive rectangle [x0, x1] x [y0, y1].
  double rect_sum(int x0, int y0, int x1, int y1) const {
    return at(x1 + 1, y1 + 1) - at(x0, y1 + 1) - at(x1 + 1, y0) + at(x0, y0);
  }

  int width() const { return stride_ - 1; }
  int height() const { return static_cast<int>(table_.size() / stride_) - 1; }

 private:
  int stride_;
  std::vector<double> table_;
};

/// Windowed first and second moments at one radius. Covariance is kept inside
/// the Cauchy-Schwarz bound so zero guide variance always means zero covariance.
struct LocalStats {
  ImagePlane mu_g;
  ImagePlane mu_i;
  ImagePlane var_g;
  ImagePlane cov_ig;
  ImagePlane var_i;
};

ImageRGB load_image(const std::filesystem::path& path);
void save_image(const ImageRGB& img, const std::filesystem::path& path);

/// 8-bit code for a sample: clamp to [0,1], then round half away from zero.
unsigned char quantize(double sample);

ImagePlane to_luminance(const ImageRGB& img);

/// Mean over the square window of the given radius, clipped to the image and
/// normalized by the clipped pixel count. Cost does not depend on the radius.
/// Sums are taken relative to the first sample, so constant planes come back exact.
ImagePlane box_mean(const ImagePlane& plane, int radius);

/// Window sums over clipped windows (no normalization), relative to `pivot`:
/// returns sum(plane - pivot) per window.
ImagePlane box_sum_centered(const ImagePlane& plane, int radius, double pivot);

/// Number of pixels in the clipped window centered at (x, y).
inline int window_count(int x, int y, int width, int height, int radius) {
  const int x0 = x - radius < 0 ? 0 : x - radius;
  const int x1 = x + radius > width - 1 ? width - 1 : x + radius;
  const int y0 = y - radius < 0 ? 0 : y - radius;
  const int y1 = y + radius > height - 1 ? height - 1 : y + radius;
  return (x1 - x0 + 1) * (y1 - y0 + 1);
}

LocalStats local_stats(const ImagePlane& input, const ImagePlane& guide, int radius);

// Elementwise helpers used across modules.
ImagePlane multiply(const ImagePlane& a, const ImagePlane& b);
ImagePlane subtract(const ImagePlane& a, const ImagePlane& b);
ImageRGB subtract(const ImageRGB& a, const ImageRGB& b);
ImageRGB add(const ImageRGB& a, const ImageRGB& b);
ImageRGB clamp01(const ImageRGB& img);
ImageRGB flip_horizontal(const ImageRGB& img);
ImageRGB crop(const ImageRGB& img, int x0, int y0, int width, int height);

}  // namespace derain
