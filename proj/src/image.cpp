#include "derain/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

namespace derain {

ImagePlane::ImagePlane(int width, int height, double fill)
    : width_(width), height_(height) {
  if (width < 1 || height < 1) throw Error("image plane dimensions must be >= 1");
  samples_.assign(static_cast<std::size_t>(width) * height, fill);
}

ImagePlane::ImagePlane(int width, int height, std::vector<double> samples)
    : width_(width), height_(height), samples_(std::move(samples)) {
  if (width < 1 || height < 1) throw Error("image plane dimensions must be >= 1");
  if (samples_.size() != static_cast<std::size_t>(width) * height)
    throw Error("sample count does not match plane dimensions");
}

bool ImagePlane::all_finite() const {
  return std::all_of(samples_.begin(), samples_.end(), [](double v) { return std::isfinite(v); });
}

ImageRGB::ImageRGB(ImagePlane red, ImagePlane green, ImagePlane blue)
    : r(std::move(red)), g(std::move(green)), b(std::move(blue)) {
  if (!r.same_shape(g) || !r.same_shape(b)) throw Error("RGB planes differ in size");
}

IntegralTable::IntegralTable(const ImagePlane& plane) : stride_(plane.width() + 1) {
  const int w = plane.width();
  const int h = plane.height();
  table_.assign(static_cast<std::size_t>(stride_) * (h + 1), 0.0);
  for (int y = 0; y < h; ++y) {
    double row_sum = 0.0;
    const auto src = plane.row(y);
    double* above = table_.data() + static_cast<std::size_t>(y) * stride_;
    double* dst = above + stride_;
    for (int x = 0; x < w; ++x) {
      row_sum += src[x];
      dst[x + 1] = above[x + 1] + row_sum;
    }
  }
}

ImagePlane box_sum_centered(const ImagePlane& plane, int radius, double pivot) {
  if (radius < 1) throw Error("box filter radius must be >= 1");
  ImagePlane shifted = plane;
  for (double& v : shifted.samples()) v -= pivot;
  const IntegralTable table(shifted);
  const int w = plane.width();
  const int h = plane.height();
  ImagePlane out(w, h);
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - radius);
    const int y1 = std::min(h - 1, y + radius);
    auto dst = out.row(y);
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - radius);
      const int x1 = std::min(w - 1, x + radius);
      dst[x] = table.rect_sum(x0, y0, x1, y1);
    }
  }
  return out;
}

ImagePlane box_mean(const ImagePlane& plane, int radius) {
  if (radius < 1) throw Error("box_mean: radius must be >= 1");
  const double pivot = plane[0];
  ImagePlane out = box_sum_centered(plane, radius, pivot);
  const int w = plane.width();
  const int h = plane.height();
  for (int y = 0; y < h; ++y) {
    auto row = out.row(y);
    for (int x = 0; x < w; ++x) row[x] = pivot + row[x] / window_count(x, y, w, h, radius);
  }
  return out;
}

ImagePlane multiply(const ImagePlane& a, const ImagePlane& b) {
  if (!a.same_shape(b)) throw Error("multiply: dimension mismatch");
  ImagePlane out(a.width(), a.height());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

ImagePlane subtract(const ImagePlane& a, const ImagePlane& b) {
  if (!a.same_shape(b)) throw Error("subtract: dimension mismatch");
  ImagePlane out(a.width(), a.height());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

LocalStats local_stats(const ImagePlane& input, const ImagePlane& guide, int radius) {
  if (!input.same_shape(guide)) throw Error("local_stats: dimension mismatch between input and guide");
  if (radius < 1) throw Error("local_stats: radius must be >= 1");
  LocalStats s;
  s.mu_g = box_mean(guide, radius);
  s.mu_i = box_mean(input, radius);
  const ImagePlane mean_gg = box_mean(multiply(guide, guide), radius);
  const ImagePlane mean_gi = box_mean(multiply(guide, input), radius);
  const ImagePlane mean_ii = box_mean(multiply(input, input), radius);
  const int w = guide.width();
  const int h = guide.height();
  s.var_g = ImagePlane(w, h);
  s.cov_ig = ImagePlane(w, h);
  s.var_i = ImagePlane(w, h);
  for (std::size_t i = 0; i < guide.size(); ++i) {
    const double var_g = std::max(0.0, mean_gg[i] - s.mu_g[i] * s.mu_g[i]);
    const double var_i = std::max(0.0, mean_ii[i] - s.mu_i[i] * s.mu_i[i]);
    const double bound = var_g == var_i ? var_g : std::sqrt(var_g * var_i);
    s.var_g[i] = var_g;
    s.var_i[i] = var_i;
    s.cov_ig[i] = std::clamp(mean_gi[i] - s.mu_g[i] * s.mu_i[i], -bound, bound);
  }
  return s;
}

ImagePlane to_luminance(const ImageRGB& img) {
  ImagePlane out(img.width(), img.height());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = 0.299 * img.r[i] + 0.587 * img.g[i] + 0.114 * img.b[i];
  return out;
}

ImageRGB subtract(const ImageRGB& a, const ImageRGB& b) {
  return {subtract(a.r, b.r), subtract(a.g, b.g), subtract(a.b, b.b)};
}

ImageRGB add(const ImageRGB& a, const ImageRGB& b) {
  if (!a.same_shape(b)) throw Error("add: dimension mismatch");
  ImageRGB out(a.width(), a.height());
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < a.r.size(); ++i) out.channel(c)[i] = a.channel(c)[i] + b.channel(c)[i];
  return out;
}

ImageRGB clamp01(const ImageRGB& img) {
  ImageRGB out = img;
  for (int c = 0; c < 3; ++c)
    for (double& v : out.channel(c).samples()) v = std::clamp(v, 0.0, 1.0);
  return out;
}

ImageRGB flip_horizontal(const ImageRGB& img) {
  ImageRGB out(img.width(), img.height());
  const int w = img.width();
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height(); ++y) {
      auto src = img.channel(c).row(y);
      auto dst = out.channel(c).row(y);
      for (int x = 0; x < w; ++x) dst[x] = src[w - 1 - x];
    }
  return out;
}

ImageRGB crop(const ImageRGB& img, int x0, int y0, int width, int height) {
  if (x0 < 0 || y0 < 0 || x0 + width > img.width() || y0 + height > img.height())
    throw Error("crop window outside image");
  ImageRGB out(width, height);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < height; ++y) {
      auto src = img.channel(c).row(y0 + y);
      std::copy_n(src.begin() + x0, width, out.channel(c).row(y).begin());
    }
  return out;
}

unsigned char quantize(double sample) {
  const double s = std::clamp(sample, 0.0, 1.0);
  return static_cast<unsigned char>(std::round(s * 255.0));
}

namespace {

using Kind = ImageIoError::Kind;

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError(Kind::kUnreadable, "cannot open image: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw ImageIoError(Kind::kUnreadable, "read failed: " + path.string());
  return bytes;
}

ImageRGB from_interleaved(const unsigned char* data, int width, int height, int channels) {
  ImageRGB img(width, height);
  const std::size_t n = static_cast<std::size_t>(width) * height;
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      const int src = channels == 1 ? 0 : c;
      img.channel(c)[i] = data[i * channels + src] / 255.0;
    }
  }
  return img;
}

ImageRGB decode_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str()))
    throw ImageIoError(Kind::kUnreadable, "PNG decode failed for " + path.string() + ": " + image.message);
  if (image.width == 0 || image.height == 0) {
    png_image_free(&image);
    throw ImageIoError(Kind::kZeroDimension, "zero-dimension image: " + path.string());
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr))
    throw ImageIoError(Kind::kUnreadable, "PNG decode failed for " + path.string() + ": " + image.message);
  return from_interleaved(buffer.data(), static_cast<int>(image.width), static_cast<int>(image.height), 3);
}

// Netpbm header token reader; skips whitespace and '#' comments.
struct PnmCursor {
  const std::vector<unsigned char>& bytes;
  std::size_t pos = 2;

  long next_int(const std::string& name) {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    long value = 0;
    std::size_t digits = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      value = value * 10 + (bytes[pos] - '0');
      if (value > 1'000'000) throw ImageIoError(Kind::kUnsupportedFormat, "netpbm header value too large");
      ++pos;
      ++digits;
    }
    if (digits == 0) throw ImageIoError(Kind::kUnreadable, "malformed netpbm header in " + name);
    return value;
  }
};

ImageRGB decode_pnm(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
  const int channels = bytes[1] == '6' ? 3 : 1;
  PnmCursor cur{bytes};
  const long width = cur.next_int(path.string());
  const long height = cur.next_int(path.string());
  const long maxval = cur.next_int(path.string());
  if (width == 0 || height == 0) throw ImageIoError(Kind::kZeroDimension, "zero-dimension image: " + path.string());
  if (maxval != 255) throw ImageIoError(Kind::kUnsupportedFormat, "only maxval 255 netpbm is supported: " + path.string());
  ++cur.pos;  // single whitespace before raster
  const std::size_t need = static_cast<std::size_t>(width) * height * channels;
  if (cur.pos + need > bytes.size()) throw ImageIoError(Kind::kUnreadable, "truncated netpbm raster: " + path.string());
  return from_interleaved(bytes.data() + cur.pos, static_cast<int>(width), static_cast<int>(height), channels);
}

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

}  // namespace

ImageRGB load_image(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  static constexpr unsigned char kPngMagic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::equal(std::begin(kPngMagic), std::end(kPngMagic), bytes.begin()))
    return decode_png(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6'))
    return decode_pnm(bytes, path);
  throw ImageIoError(Kind::kUnsupportedFormat, "unsupported image format: " + path.string());
}

void save_image(const ImageRGB& img, const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  const int w = img.width();
  const int h = img.height();
  const std::size_t n = static_cast<std::size_t>(w) * h;

  if (ext == ".pgm") {
    // Grayscale output stores luminance.
    const ImagePlane luma = to_luminance(img);
    std::vector<unsigned char> raster(n);
    for (std::size_t i = 0; i < n; ++i) raster[i] = quantize(luma[i]);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ImageIoError(Kind::kUnwritable, "cannot write image: " + path.string());
    out << "P5\n" << w << ' ' << h << "\n255\n";
    out.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
    if (!out) throw ImageIoError(Kind::kUnwritable, "write failed: " + path.string());
    return;
  }

  std::vector<unsigned char> raster(n * 3);
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) raster[i * 3 + c] = quantize(img.channel(c)[i]);

  if (ext == ".ppm") {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ImageIoError(Kind::kUnwritable, "cannot write image: " + path.string());
    out << "P6\n" << w << ' ' << h << "\n255\n";
    out.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
    if (!out) throw ImageIoError(Kind::kUnwritable, "write failed: " + path.string());
    return;
  }
  if (ext != ".png") throw ImageIoError(Kind::kUnsupportedFormat, "unsupported output extension: " + path.string());

  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, raster.data(), 0, nullptr))
    throw ImageIoError(Kind::kUnwritable, "PNG encode failed for " + path.string() + ": " + image.message);
}

}  // namespace derain
