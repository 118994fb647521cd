#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "derain/nn/tensor.hpp"

namespace derain::nn {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

template <typename T>
T sigmoid(T v) {
  return T(1) / (T(1) + std::exp(-v));
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> y = x;
  for (T& v : y.data) v = v > T(0) ? v : T(0);
  return y;
}

/// Gradient of relu given the pre-activation input.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& dy, const Tensor<T>& pre) {
  Tensor<T> dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i)
    if (!(pre.data[i] > T(0))) dx.data[i] = T(0);
  return dx;
}

/// Stride-1 convolution with zero "same" padding and an odd square kernel.
/// Lowered to im2col + GEMM; the input is cached for backward.
template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const std::string& name, int in_channels, int out_channels, int kernel)
      : weight(name + ".weight", {out_channels, in_channels, kernel, kernel}),
        bias(name + ".bias", {out_channels}),
        in_(in_channels),
        out_(out_channels),
        k_(kernel) {
    if (kernel % 2 == 0) throw Error("conv2d: kernel size must be odd");
  }

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  int kernel() const { return k_; }

  Tensor<T> forward(const Tensor<T>& x) {
    if (x.c != in_) throw Error("conv2d " + weight.name + ": expected " + std::to_string(in_) +
                                " input channels, got " + std::to_string(x.c));
    input_ = x;
    Tensor<T> y(x.n, out_, x.h, x.w);
    const auto hw = static_cast<Eigen::Index>(x.plane());
    const ConstMatrixMap<T> wm(weight.value.data(), out_, rows());
    const Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(bias.value.data(), out_);
    Buffer<T> cols;
    for (int bi = 0; bi < x.n; ++bi) {
      MatrixMap<T> ym(y.map(bi, 0).data(), out_, hw);
      ym.noalias() = wm * columns(x, bi, cols);
      ym.colwise() += b;
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const Tensor<T>& x = input_;
    Tensor<T> dx(x.n, x.c, x.h, x.w);
    const auto hw = static_cast<Eigen::Index>(x.plane());
    const ConstMatrixMap<T> wm(weight.value.data(), out_, rows());
    MatrixMap<T> dw(weight.grad.data(), out_, rows());
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> db(bias.grad.data(), out_);
    Buffer<T> cols;
    RowMatrix<T> dcols;
    for (int bi = 0; bi < x.n; ++bi) {
      const ConstMatrixMap<T> dym(dy.map(bi, 0).data(), out_, hw);
      const auto c = columns(x, bi, cols);
      dw.noalias() += dym * c.transpose();
      db += dym.rowwise().sum();
      if (k_ == 1) {
        MatrixMap<T> dxm(dx.map(bi, 0).data(), in_, hw);
        dxm.noalias() = wm.transpose() * dym;
      } else {
        dcols.noalias() = wm.transpose() * dym;
        col2im(dcols, dx, bi);
      }
    }
    return dx;
  }

  void collect(std::vector<Param<T>*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }

  Param<T> weight;
  Param<T> bias;

 private:
  Eigen::Index rows() const { return static_cast<Eigen::Index>(in_) * k_ * k_; }

  // im2col of one batch item; 1x1 kernels view the input directly.
  ConstMatrixMap<T> columns(const Tensor<T>& x, int bi, Buffer<T>& cols) const {
    const auto hw = static_cast<Eigen::Index>(x.plane());
    if (k_ == 1) return ConstMatrixMap<T>(x.map(bi, 0).data(), in_, hw);
    const int pad = k_ / 2;
    cols.assign(static_cast<std::size_t>(rows()) * hw, T(0));
    for (int ci = 0; ci < in_; ++ci) {
      const T* src = x.map(bi, ci).data();
      for (int ky = 0; ky < k_; ++ky)
        for (int kx = 0; kx < k_; ++kx) {
          T* dst = cols.data() + ((static_cast<std::size_t>(ci) * k_ + ky) * k_ + kx) * hw;
          const int dx = kx - pad;
          const int x0 = std::max(0, -dx);
          const int x1 = std::min(x.w, x.w - dx);
          if (x1 <= x0) continue;
          for (int y = 0; y < x.h; ++y) {
            const int sy = y + ky - pad;
            if (sy < 0 || sy >= x.h) continue;
            std::memcpy(dst + static_cast<std::size_t>(y) * x.w + x0, src + static_cast<std::size_t>(sy) * x.w + x0 + dx,
                        sizeof(T) * static_cast<std::size_t>(x1 - x0));
          }
        }
    }
    return ConstMatrixMap<T>(cols.data(), rows(), hw);
  }

  void col2im(const RowMatrix<T>& dcols, Tensor<T>& dx, int bi) const {
    const int pad = k_ / 2;
    const std::size_t hw = dx.plane();
    for (int ci = 0; ci < in_; ++ci) {
      T* dst = dx.map(bi, ci).data();
      for (int ky = 0; ky < k_; ++ky)
        for (int kx = 0; kx < k_; ++kx) {
          const T* src = dcols.data() + ((static_cast<std::size_t>(ci) * k_ + ky) * k_ + kx) * hw;
          const int ox = kx - pad;
          const int x0 = std::max(0, -ox);
          const int x1 = std::min(dx.w, dx.w - ox);
          for (int y = 0; y < dx.h; ++y) {
            const int sy = y + ky - pad;
            if (sy < 0 || sy >= dx.h) continue;
            T* drow = dst + static_cast<std::size_t>(sy) * dx.w + ox;
            const T* srow = src + static_cast<std::size_t>(y) * dx.w;
            for (int xx = x0; xx < x1; ++xx) drow[xx] += srow[xx];
          }
        }
    }
  }

  int in_ = 0, out_ = 0, k_ = 1;
  Tensor<T> input_;
};

/// Squeeze-excitation style channel gate:
/// sigmoid(up(relu(down(global_avg_pool(x))))) scales each channel.
template <typename T>
class ChannelAttention {
 public:
  ChannelAttention() = default;
  ChannelAttention(const std::string& name, int channels, int reduction)
      : down(name + ".down", channels, channels / reduction, 1), up(name + ".up", channels / reduction, channels, 1) {}

  Tensor<T> forward(const Tensor<T>& x) {
    input_ = x;
    Tensor<T> pooled(x.n, x.c, 1, 1);
    for (int bi = 0; bi < x.n; ++bi)
      for (int ci = 0; ci < x.c; ++ci) {
        T sum = T(0);
        for (T v : x.map(bi, ci)) sum += v;
        pooled.at(bi, ci, 0, 0) = sum / static_cast<T>(x.plane());
      }
    hidden_ = down.forward(pooled);
    gate_ = up.forward(relu(hidden_));
    for (T& g : gate_.data) g = sigmoid(g);
    Tensor<T> y = x;
    for (int bi = 0; bi < x.n; ++bi)
      for (int ci = 0; ci < x.c; ++ci) {
        const T g = gate_.at(bi, ci, 0, 0);
        for (T& v : y.map(bi, ci)) v *= g;
      }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const Tensor<T>& x = input_;
    Tensor<T> dx(x.n, x.c, x.h, x.w);
    Tensor<T> dgate(x.n, x.c, 1, 1);
    for (int bi = 0; bi < x.n; ++bi)
      for (int ci = 0; ci < x.c; ++ci) {
        const T g = gate_.at(bi, ci, 0, 0);
        const auto xs = x.map(bi, ci);
        const auto dys = dy.map(bi, ci);
        auto dxs = dx.map(bi, ci);
        T acc = T(0);
        for (std::size_t i = 0; i < xs.size(); ++i) {
          acc += dys[i] * xs[i];
          dxs[i] = dys[i] * g;
        }
        dgate.at(bi, ci, 0, 0) = acc * g * (T(1) - g);
      }
    const Tensor<T> dpooled = down.backward(relu_backward(up.backward(dgate), hidden_));
    for (int bi = 0; bi < x.n; ++bi)
      for (int ci = 0; ci < x.c; ++ci) {
        const T share = dpooled.at(bi, ci, 0, 0) / static_cast<T>(x.plane());
        for (T& v : dx.map(bi, ci)) v += share;
      }
    return dx;
  }

  const Tensor<T>& gate() const { return gate_; }

  void collect(std::vector<Param<T>*>& out) {
    down.collect(out);
    up.collect(out);
  }

  Conv2d<T> down;
  Conv2d<T> up;

 private:
  Tensor<T> input_, hidden_, gate_;
};

/// Per-pixel gate from the channel mean and channel max maps through a k x k conv.
template <typename T>
class SpatialAttention {
 public:
  SpatialAttention() = default;
  SpatialAttention(const std::string& name, int kernel) : conv(name + ".conv", 2, 1, kernel) {}

  Tensor<T> forward(const Tensor<T>& x) {
    input_ = x;
    Tensor<T> pooled(x.n, 2, x.h, x.w);
    argmax_.assign(static_cast<std::size_t>(x.n) * x.plane(), 0);
    for (int bi = 0; bi < x.n; ++bi) {
      auto mean = pooled.map(bi, 0);
      auto peak = pooled.map(bi, 1);
      for (std::size_t i = 0; i < x.plane(); ++i) {
        T sum = T(0);
        T best = x.map(bi, 0)[i];
        int best_c = 0;
        for (int ci = 0; ci < x.c; ++ci) {
          const T v = x.map(bi, ci)[i];
          sum += v;
          if (v > best) {
            best = v;
            best_c = ci;
          }
        }
        mean[i] = sum / static_cast<T>(x.c);
        peak[i] = best;
        argmax_[bi * x.plane() + i] = best_c;
      }
    }
    gate_ = conv.forward(pooled);
    for (T& g : gate_.data) g = sigmoid(g);
    Tensor<T> y = x;
    for (int bi = 0; bi < x.n; ++bi) {
      const auto g = gate_.map(bi, 0);
      for (int ci = 0; ci < x.c; ++ci) {
        auto ys = y.map(bi, ci);
        for (std::size_t i = 0; i < ys.size(); ++i) ys[i] *= g[i];
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const Tensor<T>& x = input_;
    Tensor<T> dx(x.n, x.c, x.h, x.w);
    Tensor<T> dgate(x.n, 1, x.h, x.w);
    for (int bi = 0; bi < x.n; ++bi) {
      const auto g = gate_.map(bi, 0);
      auto dg = dgate.map(bi, 0);
      for (int ci = 0; ci < x.c; ++ci) {
        const auto xs = x.map(bi, ci);
        const auto dys = dy.map(bi, ci);
        auto dxs = dx.map(bi, ci);
        for (std::size_t i = 0; i < xs.size(); ++i) {
          dg[i] += dys[i] * xs[i];
          dxs[i] = dys[i] * g[i];
        }
      }
      for (std::size_t i = 0; i < dg.size(); ++i) dg[i] *= g[i] * (T(1) - g[i]);
    }
    const Tensor<T> dpooled = conv.backward(dgate);
    for (int bi = 0; bi < x.n; ++bi) {
      const auto dmean = dpooled.map(bi, 0);
      const auto dpeak = dpooled.map(bi, 1);
      for (std::size_t i = 0; i < x.plane(); ++i) {
        const T share = dmean[i] / static_cast<T>(x.c);
        for (int ci = 0; ci < x.c; ++ci) dx.map(bi, ci)[i] += share;
        dx.map(bi, argmax_[bi * x.plane() + i])[i] += dpeak[i];
      }
    }
    return dx;
  }

  const Tensor<T>& gate() const { return gate_; }

  void collect(std::vector<Param<T>*>& out) { conv.collect(out); }

  Conv2d<T> conv;

 private:
  Tensor<T> input_, gate_;
  std::vector<int> argmax_;
};

}  // namespace derain::nn
