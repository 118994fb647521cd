#pragma once

#include <cmath>

#include "derain/nn/tensor.hpp"

namespace derain::nn {

/// Hybrid L1/L2 penalty: |z| beyond the knee c, (z^2 + c^2) / (2c) inside it.
inline double psi(double z, double c) {
  const double a = std::abs(z);
  return a > c ? a : (z * z + c * c) / (2.0 * c);
}

/// Derivative of psi: sign(z) beyond the knee, z / c inside it.
inline double psi_prime(double z, double c) {
  if (z >= c) return 1.0;
  if (z <= -c) return -1.0;
  return z / c;
}

template <typename T>
struct LossResult {
  double value = 0.0;
  Tensor<T> grad;  ///< d(loss)/d(prediction)
};

/// Sum over all elements of psi(target - prediction).
template <typename T>
LossResult<T> huber_loss(const Tensor<T>& prediction, const Tensor<T>& target, double c) {
  if (!(c > 0.0)) throw Error("huber_loss: knee c must be > 0");
  if (!prediction.same_shape(target)) throw Error("huber_loss: shape mismatch");
  LossResult<T> r;
  r.grad = Tensor<T>(prediction.n, prediction.c, prediction.h, prediction.w);
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const double z = static_cast<double>(target.data[i]) - static_cast<double>(prediction.data[i]);
    r.value += psi(z, c);
    r.grad.data[i] = static_cast<T>(-psi_prime(z, c));
  }
  return r;
}

}  // namespace derain::nn
