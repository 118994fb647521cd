#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "derain/nn/layers.hpp"

namespace derain::nn {

struct NetworkConfig {
  std::uint32_t n_rrg = 4;
  std::uint32_t n_dab_per_rrg = 8;
  std::uint32_t channels = 64;
  std::uint32_t ca_reduction = 8;
  std::uint32_t sa_kernel = 7;
  bool use_rsgb = true;

  void validate() const;
  bool operator==(const NetworkConfig&) const = default;
};

/// Dual attention block: two 3x3 convs, parallel channel and spatial
/// attention, 1x1 fusion of the concatenated branches, residual add.
template <typename T>
class DualAttentionBlock {
 public:
  DualAttentionBlock(const std::string& name, const NetworkConfig& cfg)
      : conv1(name + ".conv1", cfg.channels, cfg.channels, 3),
        conv2(name + ".conv2", cfg.channels, cfg.channels, 3),
        ca(name + ".ca", cfg.channels, cfg.ca_reduction),
        sa(name + ".sa", cfg.sa_kernel),
        fuse(name + ".fuse", 2 * cfg.channels, cfg.channels, 1) {}

  Tensor<T> forward(const Tensor<T>& x) {
    pre_relu_ = conv1.forward(x);
    const Tensor<T> f = conv2.forward(relu(pre_relu_));
    Tensor<T> y = fuse.forward(concat_channels(ca.forward(f), sa.forward(f)));
    y += x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> dca, dsa;
    split_channels(fuse.backward(dy), static_cast<int>(conv2.out_channels()), dca, dsa);
    Tensor<T> df = ca.backward(dca);
    df += sa.backward(dsa);
    Tensor<T> dx = conv1.backward(relu_backward(conv2.backward(df), pre_relu_));
    dx += dy;
    return dx;
  }

  void collect(std::vector<Param<T>*>& out) {
    conv1.collect(out);
    conv2.collect(out);
    ca.collect(out);
    sa.collect(out);
    fuse.collect(out);
  }

  Conv2d<T> conv1, conv2;
  ChannelAttention<T> ca;
  SpatialAttention<T> sa;
  Conv2d<T> fuse;

 private:
  Tensor<T> pre_relu_;
};

/// Recursive residual group: x + conv3x3(DAB_n(...DAB_1(x))).
template <typename T>
class ResidualGroup {
 public:
  ResidualGroup(const std::string& name, const NetworkConfig& cfg)
      : tail(name + ".tail", cfg.channels, cfg.channels, 3) {
    for (std::uint32_t i = 0; i < cfg.n_dab_per_rrg; ++i)
      blocks.emplace_back(name + ".dab" + std::to_string(i), cfg);
  }

  Tensor<T> forward(const Tensor<T>& x) {
    Tensor<T> t = x;
    for (auto& b : blocks) t = b.forward(t);
    Tensor<T> y = tail.forward(t);
    y += x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> dt = tail.backward(dy);
    for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) dt = it->backward(dt);
    dt += dy;
    return dt;
  }

  void collect(std::vector<Param<T>*>& out) {
    for (auto& b : blocks) b.collect(out);
    tail.collect(out);
  }

  std::vector<DualAttentionBlock<T>> blocks;
  Conv2d<T> tail;
};

/// Rain streak guide block: conv3x3(3->C), relu, conv3x3(C->C) on the
/// high-frequency layer.
template <typename T>
class StreakGuide {
 public:
  StreakGuide(const std::string& name, const NetworkConfig& cfg)
      : conv1(name + ".conv1", 3, cfg.channels, 3), conv2(name + ".conv2", cfg.channels, cfg.channels, 3) {}

  Tensor<T> forward(const Tensor<T>& hf) {
    pre_relu_ = conv1.forward(hf);
    return conv2.forward(relu(pre_relu_));
  }

  Tensor<T> backward(const Tensor<T>& dy) { return conv1.backward(relu_backward(conv2.backward(dy), pre_relu_)); }

  void collect(std::vector<Param<T>*>& out) {
    conv1.collect(out);
    conv2.collect(out);
  }

  Conv2d<T> conv1, conv2;

 private:
  Tensor<T> pre_relu_;
};

template <typename T>
struct NetworkGrads {
  Tensor<T> d_input;
  Tensor<T> d_high;
};

/// Rain-streak-aware restoration network. Predicts the streak layer and
/// returns input - streaks. Guidance features from each streak guide block are
/// added to the trunk before the matching residual group.
template <typename T>
class DerainNet {
 public:
  explicit DerainNet(const NetworkConfig& cfg)
      : head("head", 3, cfg.channels, 3), tail("tail", cfg.channels, 3, 3), config_(cfg) {
    cfg.validate();
    for (std::uint32_t i = 0; i < cfg.n_rrg; ++i) {
      groups.emplace_back("rrg" + std::to_string(i), cfg);
      if (cfg.use_rsgb) guides.emplace_back("rsgb" + std::to_string(i), cfg);
    }
  }

  const NetworkConfig& config() const { return config_; }

  Tensor<T> forward(const Tensor<T>& input, const Tensor<T>& high) {
    if (input.c != 3) throw Error("network: input must have 3 channels");
    if (config_.use_rsgb && !(high.n == input.n && high.c == 3 && high.h == input.h && high.w == input.w))
      throw Error("network: high-frequency layer does not match the input shape");
    Tensor<T> t = head.forward(input);
    for (std::size_t i = 0; i < groups.size(); ++i) {
      if (config_.use_rsgb) t += guides[i].forward(high);
      t = groups[i].forward(t);
    }
    Tensor<T> out = input;
    const Tensor<T> streaks = tail.forward(t);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= streaks.data[i];
    return out;
  }

  /// Backpropagates d(loss)/d(output); parameter gradients accumulate.
  NetworkGrads<T> backward(const Tensor<T>& d_out) {
    NetworkGrads<T> g;
    Tensor<T> d_streaks = d_out;
    for (T& v : d_streaks.data) v = -v;
    Tensor<T> dt = tail.backward(d_streaks);
    for (std::size_t i = groups.size(); i-- > 0;) {
      dt = groups[i].backward(dt);
      if (config_.use_rsgb) {
        Tensor<T> dh = guides[i].backward(dt);
        if (g.d_high.size() == 0)
          g.d_high = std::move(dh);
        else
          g.d_high += dh;
      }
    }
    g.d_input = head.backward(dt);
    g.d_input += d_out;
    return g;
  }

  /// Parameters in a fixed order: head, per stage (guide, group), tail.
  std::vector<Param<T>*> parameters() {
    std::vector<Param<T>*> out;
    head.collect(out);
    for (std::size_t i = 0; i < groups.size(); ++i) {
      if (config_.use_rsgb) guides[i].collect(out);
      groups[i].collect(out);
    }
    tail.collect(out);
    return out;
  }

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }

  Conv2d<T> head;
  std::vector<StreakGuide<T>> guides;
  std::vector<ResidualGroup<T>> groups;
  Conv2d<T> tail;

 private:
  NetworkConfig config_;
};

/// Names of parameters whose initial value is zero: attention output convs and
/// the streak head, so a fresh network restores its input unchanged.
bool zero_initialized(const std::string& param_name);

/// Fan-in scaled uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)). Each
/// parameter draws from its own stream keyed on (seed, name), so toggling the
/// guide blocks leaves the shared parameters' initial values unchanged.
template <typename T>
void initialize(DerainNet<T>& net, std::uint64_t seed);

}  // namespace derain::nn
