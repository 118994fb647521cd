#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "derain/nn/tensor.hpp"

namespace derain::nn {

template <typename T>
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;
  std::uint64_t t = 0;
  std::vector<Buffer<T>> m;
  std::vector<Buffer<T>> v;
};

/// One bias-corrected Adam update. Moments are allocated on first use.
template <typename T>
void adam_step(std::span<Param<T>* const> params, AdamState<T>& state, double lr) {
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.emplace_back(p->size(), T(0));
      state.v.emplace_back(p->size(), T(0));
    }
  }
  if (state.m.size() != params.size()) throw Error("adam_step: parameter count does not match optimizer state");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (state.m[i].size() != params[i]->size() || params[i]->grad.size() != params[i]->size())
      throw Error("adam_step: dimension mismatch for " + params[i]->name);

  ++state.t;
  const double correction1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double correction2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  const T b1 = static_cast<T>(state.beta1);
  const T b2 = static_cast<T>(state.beta2);
  const T step = static_cast<T>(lr / correction1);
  const T inv_sqrt_c2 = static_cast<T>(1.0 / std::sqrt(correction2));
  const T eps = static_cast<T>(state.epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& value = params[i]->value;
    const auto& grad = params[i]->grad;
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < value.size(); ++j) {
      const T g = grad[j];
      m[j] = b1 * m[j] + (T(1) - b1) * g;
      v[j] = b2 * v[j] + (T(1) - b2) * g * g;
      value[j] -= step * m[j] / (std::sqrt(v[j]) * inv_sqrt_c2 + eps);
    }
  }
}

/// lr_min + (lr_max - lr_min) * (1 + cos(pi * step / total)) / 2
double cosine_lr(std::uint64_t step, std::uint64_t total, double lr_max, double lr_min);

}  // namespace derain::nn
