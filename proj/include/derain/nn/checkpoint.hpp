#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "derain/nn/network.hpp"
#include "derain/nn/optim.hpp"

namespace derain::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
  bool operator==(const NamedTensor&) const = default;
};

struct OptimizerSnapshot {
  std::uint64_t t = 0;
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;
  bool operator==(const OptimizerSnapshot&) const = default;
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  NetworkConfig config;
  std::vector<NamedTensor> tensors;
  std::optional<OptimizerSnapshot> optimizer;
  std::uint64_t step = 0;
  bool operator==(const Checkpoint&) const = default;
};

class CheckpointError : public Error {
 public:
  enum class Kind { kIo, kVersion, kTruncated, kCorrupt, kMismatch };
  CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Binary layout, little-endian throughout:
//   "RSAD" | u32 version | u32 n_rrg, n_dab_per_rrg, channels, ca_reduction,
//   sa_kernel, use_rsgb | u32 tensor count | per tensor: u16 name length,
//   name bytes, u8 rank, u32 dims[rank], f32 data | u64 training step |
//   u8 optimizer flag | if set: u64 adam t, then f32 first and second moments
//   for each tensor in order.
std::vector<unsigned char> serialize(const Checkpoint& ckpt);
Checkpoint deserialize(std::span<const unsigned char> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

template <typename T>
Checkpoint make_checkpoint(DerainNet<T>& net, const AdamState<T>* optimizer, std::uint64_t step) {
  Checkpoint ckpt;
  ckpt.config = net.config();
  ckpt.step = step;
  for (const auto* p : net.parameters()) {
    NamedTensor t{p->name, {}, {}};
    for (int d : p->dims) t.dims.push_back(static_cast<std::uint32_t>(d));
    t.data.assign(p->value.begin(), p->value.end());
    ckpt.tensors.push_back(std::move(t));
  }
  if (optimizer != nullptr && !optimizer->m.empty()) {
    OptimizerSnapshot snap;
    snap.t = optimizer->t;
    for (std::size_t i = 0; i < optimizer->m.size(); ++i) {
      snap.m.emplace_back(optimizer->m[i].begin(), optimizer->m[i].end());
      snap.v.emplace_back(optimizer->v[i].begin(), optimizer->v[i].end());
    }
    ckpt.optimizer = std::move(snap);
  }
  return ckpt;
}

const NamedTensor& find_tensor(const Checkpoint& ckpt, const std::string& name);

/// Checks that every parameter implied by the config is present exactly once
/// with matching dims, and nothing else is.
void validate_checkpoint(const Checkpoint& ckpt);

template <typename T>
void load_parameters(DerainNet<T>& net, const Checkpoint& ckpt) {
  if (!(net.config() == ckpt.config))
    throw CheckpointError(CheckpointError::Kind::kMismatch, "checkpoint config does not match the network");
  validate_checkpoint(ckpt);
  for (auto* p : net.parameters()) {
    const NamedTensor& t = find_tensor(ckpt, p->name);
    p->value.assign(t.data.begin(), t.data.end());
  }
}

template <typename T>
AdamState<T> load_optimizer(const Checkpoint& ckpt) {
  AdamState<T> state;
  if (!ckpt.optimizer) return state;
  state.t = ckpt.optimizer->t;
  for (std::size_t i = 0; i < ckpt.optimizer->m.size(); ++i) {
    state.m.emplace_back(ckpt.optimizer->m[i].begin(), ckpt.optimizer->m[i].end());
    state.v.emplace_back(ckpt.optimizer->v[i].begin(), ckpt.optimizer->v[i].end());
  }
  return state;
}

}  // namespace derain::nn
