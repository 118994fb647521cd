#include "derain/nn/optim.hpp"

#include <numbers>
#include <string>

namespace derain::nn {

double cosine_lr(std::uint64_t step, std::uint64_t total, double lr_max, double lr_min) {
  if (total < 1) throw Error("cosine_lr: total steps must be >= 1");
  if (step > total)
    throw Error("cosine_lr: step " + std::to_string(step) + " outside [0, " + std::to_string(total) + "]");
  const double phase = std::numbers::pi * static_cast<double>(step) / static_cast<double>(total);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(phase));
}

}  // namespace derain::nn
