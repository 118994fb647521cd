#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "derain/image.hpp"

namespace derain::nn {

/// Storage aligned to Eigen's vector width. Eigen picks its summation order
/// from pointer alignment, so fixed alignment keeps results bit-reproducible.
template <typename T>
using Buffer = std::vector<T, Eigen::aligned_allocator<T>>;

/// Dense NCHW tensor.
template <typename T>
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  Buffer<T> data;

  Tensor() = default;
  Tensor(int batch, int channels, int height, int width, T fill = T(0))
      : n(batch), c(channels), h(height), w(width),
        data(static_cast<std::size_t>(batch) * channels * height * width, fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::size_t index(int bi, int ci, int y, int x) const {
    return ((static_cast<std::size_t>(bi) * c + ci) * h + y) * w + x;
  }
  T& at(int bi, int ci, int y, int x) { return data[index(bi, ci, y, x)]; }
  T at(int bi, int ci, int y, int x) const { return data[index(bi, ci, y, x)]; }

  /// One (batch, channel) spatial plane.
  std::span<T> map(int bi, int ci) { return {data.data() + index(bi, ci, 0, 0), plane()}; }
  std::span<const T> map(int bi, int ci) const { return {data.data() + index(bi, ci, 0, 0), plane()}; }

  bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
  bool all_finite() const {
    return std::all_of(data.begin(), data.end(), [](T v) { return std::isfinite(v); });
  }

  Tensor& operator+=(const Tensor& o) {
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
    return *this;
  }
};

/// Trainable parameter: value plus accumulated gradient.
template <typename T>
struct Param {
  std::string name;
  std::vector<int> dims;
  Buffer<T> value;
  Buffer<T> grad;

  Param() = default;
  Param(std::string param_name, std::vector<int> param_dims) : name(std::move(param_name)), dims(std::move(param_dims)) {
    std::size_t count = 1;
    for (int d : dims) count *= static_cast<std::size_t>(d);
    value.assign(count, T(0));
    grad.assign(count, T(0));
  }

  std::size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T> out(a.n, a.c + b.c, a.h, a.w);
  for (int bi = 0; bi < a.n; ++bi) {
    for (int ci = 0; ci < a.c; ++ci) std::ranges::copy(a.map(bi, ci), out.map(bi, ci).begin());
    for (int ci = 0; ci < b.c; ++ci) std::ranges::copy(b.map(bi, ci), out.map(bi, a.c + ci).begin());
  }
  return out;
}

/// Inverse of concat_channels: first `first_channels` go to `a`, the rest to `b`.
template <typename T>
void split_channels(const Tensor<T>& src, int first_channels, Tensor<T>& a, Tensor<T>& b) {
  a = Tensor<T>(src.n, first_channels, src.h, src.w);
  b = Tensor<T>(src.n, src.c - first_channels, src.h, src.w);
  for (int bi = 0; bi < src.n; ++bi) {
    for (int ci = 0; ci < a.c; ++ci) std::ranges::copy(src.map(bi, ci), a.map(bi, ci).begin());
    for (int ci = 0; ci < b.c; ++ci) std::ranges::copy(src.map(bi, first_channels + ci), b.map(bi, ci).begin());
  }
}

/// Packs images into an (N, 3, H, W) tensor.
template <typename T>
Tensor<T> to_tensor(std::span<const ImageRGB> images) {
  const int h = images.front().height();
  const int w = images.front().width();
  Tensor<T> t(static_cast<int>(images.size()), 3, h, w);
  for (int bi = 0; bi < t.n; ++bi) {
    if (images[bi].width() != w || images[bi].height() != h) throw Error("to_tensor: images differ in size");
    for (int ci = 0; ci < 3; ++ci) {
      const auto src = images[bi].channel(ci).samples();
      auto dst = t.map(bi, ci);
      for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<T>(src[i]);
    }
  }
  return t;
}

template <typename T>
Tensor<T> to_tensor(const ImageRGB& image) {
  return to_tensor<T>(std::span<const ImageRGB>(&image, 1));
}

template <typename T>
ImageRGB to_image(const Tensor<T>& t, int batch_index) {
  if (t.c != 3) throw Error("to_image: tensor must have 3 channels");
  ImageRGB img(t.w, t.h);
  for (int ci = 0; ci < 3; ++ci) {
    const auto src = t.map(batch_index, ci);
    auto dst = img.channel(ci).samples();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<double>(src[i]);
  }
  return img;
}

}  // namespace derain::nn
