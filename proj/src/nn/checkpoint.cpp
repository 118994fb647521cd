#include "derain/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace derain::nn {

namespace {

using Kind = CheckpointError::Kind;

constexpr unsigned char kMagic[4] = {'R', 'S', 'A', 'D'};

class Writer {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  template <typename U>
  void le(U value) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<unsigned char>(value >> (8 * i)));
  }
  void f32(float value) { le(std::bit_cast<std::uint32_t>(value)); }
  void f32s(const std::vector<float>& values) {
    for (float v : values) f32(v);
  }
  std::vector<unsigned char> take() { return std::move(out_); }

 private:
  std::vector<unsigned char> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

  const unsigned char* take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n)
      throw CheckpointError(Kind::kTruncated, std::string("checkpoint truncated while reading ") + what);
    const unsigned char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  template <typename U>
  U le(const char* what) {
    const unsigned char* p = take(sizeof(U), what);
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(static_cast<U>(p[i]) << (8 * i));
    return value;
  }
  std::vector<float> f32s(std::size_t count, const char* what) {
    if ((bytes_.size() - pos_) / 4 < count)
      throw CheckpointError(Kind::kTruncated, std::string("checkpoint truncated while reading ") + what);
    std::vector<float> out(count);
    for (float& v : out) v = std::bit_cast<float>(le<std::uint32_t>(what));
    return out;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 0;
};

std::size_t element_count(const std::vector<std::uint32_t>& dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

}  // namespace

std::vector<unsigned char> serialize(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kMagic, 4);
  w.le<std::uint32_t>(ckpt.version);
  const NetworkConfig& c = ckpt.config;
  w.le<std::uint32_t>(c.n_rrg);
  w.le<std::uint32_t>(c.n_dab_per_rrg);
  w.le<std::uint32_t>(c.channels);
  w.le<std::uint32_t>(c.ca_reduction);
  w.le<std::uint32_t>(c.sa_kernel);
  w.le<std::uint32_t>(c.use_rsgb ? 1u : 0u);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    if (t.name.size() > 0xffff) throw CheckpointError(Kind::kCorrupt, "tensor name too long: " + t.name);
    if (t.dims.size() > 0xff) throw CheckpointError(Kind::kCorrupt, "tensor rank too large: " + t.name);
    if (element_count(t.dims) != t.data.size())
      throw CheckpointError(Kind::kCorrupt, "tensor data does not match its dims: " + t.name);
    w.le<std::uint16_t>(static_cast<std::uint16_t>(t.name.size()));
    w.bytes(t.name.data(), t.name.size());
    w.le<std::uint8_t>(static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) w.le<std::uint32_t>(d);
    w.f32s(t.data);
  }
  w.le<std::uint64_t>(ckpt.step);
  w.le<std::uint8_t>(ckpt.optimizer ? 1 : 0);
  if (ckpt.optimizer) {
    const auto& opt = *ckpt.optimizer;
    if (opt.m.size() != ckpt.tensors.size() || opt.v.size() != ckpt.tensors.size())
      throw CheckpointError(Kind::kCorrupt, "optimizer state does not cover every tensor");
    w.le<std::uint64_t>(opt.t);
    for (std::size_t i = 0; i < ckpt.tensors.size(); ++i) {
      if (opt.m[i].size() != ckpt.tensors[i].data.size() || opt.v[i].size() != ckpt.tensors[i].data.size())
        throw CheckpointError(Kind::kCorrupt, "optimizer moments do not match " + ckpt.tensors[i].name);
      w.f32s(opt.m[i]);
      w.f32s(opt.v[i]);
    }
  }
  return w.take();
}

Checkpoint deserialize(std::span<const unsigned char> bytes) {
  Reader r(bytes);
  const std::size_t head = std::min<std::size_t>(bytes.size(), 4);
  if (std::memcmp(bytes.data(), kMagic, head) != 0)
    throw CheckpointError(Kind::kVersion, "not a checkpoint file (bad magic)");
  r.take(4, "magic");
  Checkpoint ckpt;
  ckpt.version = r.le<std::uint32_t>("version");
  if (ckpt.version != kCheckpointVersion)
    throw CheckpointError(Kind::kVersion, "unsupported checkpoint version " + std::to_string(ckpt.version));
  NetworkConfig& c = ckpt.config;
  c.n_rrg = r.le<std::uint32_t>("config");
  c.n_dab_per_rrg = r.le<std::uint32_t>("config");
  c.channels = r.le<std::uint32_t>("config");
  c.ca_reduction = r.le<std::uint32_t>("config");
  c.sa_kernel = r.le<std::uint32_t>("config");
  const auto use_rsgb = r.le<std::uint32_t>("config");
  if (use_rsgb > 1) throw CheckpointError(Kind::kCorrupt, "invalid use_rsgb flag");
  c.use_rsgb = use_rsgb == 1;
  const auto count = r.le<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    const auto name_len = r.le<std::uint16_t>("tensor name");
    const unsigned char* name = r.take(name_len, "tensor name");
    t.name.assign(reinterpret_cast<const char*>(name), name_len);
    const auto rank = r.le<std::uint8_t>("tensor rank");
    for (std::uint8_t d = 0; d < rank; ++d) t.dims.push_back(r.le<std::uint32_t>("tensor dims"));
    t.data = r.f32s(element_count(t.dims), "tensor data");
    ckpt.tensors.push_back(std::move(t));
  }
  ckpt.step = r.le<std::uint64_t>("step count");
  const auto has_optimizer = r.le<std::uint8_t>("optimizer flag");
  if (has_optimizer > 1) throw CheckpointError(Kind::kCorrupt, "invalid optimizer flag");
  if (has_optimizer == 1) {
    OptimizerSnapshot opt;
    opt.t = r.le<std::uint64_t>("optimizer step");
    for (const auto& t : ckpt.tensors) {
      opt.m.push_back(r.f32s(t.data.size(), "optimizer moments"));
      opt.v.push_back(r.f32s(t.data.size(), "optimizer moments"));
    }
    ckpt.optimizer = std::move(opt);
  }
  if (!r.done()) throw CheckpointError(Kind::kCorrupt, "trailing bytes after checkpoint payload");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(Kind::kIo, "cannot open checkpoint for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(Kind::kIo, "failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(Kind::kIo, "cannot open checkpoint: " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw CheckpointError(Kind::kIo, "failed reading checkpoint: " + path.string());
  return deserialize(bytes);
}

const NamedTensor& find_tensor(const Checkpoint& ckpt, const std::string& name) {
  for (const auto& t : ckpt.tensors)
    if (t.name == name) return t;
  throw CheckpointError(Kind::kMismatch, "checkpoint is missing tensor " + name);
}

void validate_checkpoint(const Checkpoint& ckpt) {
  try {
    ckpt.config.validate();
  } catch (const Error& e) {
    throw CheckpointError(Kind::kMismatch, std::string("checkpoint config invalid: ") + e.what());
  }
  DerainNet<float> skeleton(ckpt.config);
  const auto expected = skeleton.parameters();
  if (expected.size() != ckpt.tensors.size())
    throw CheckpointError(Kind::kMismatch, "checkpoint has " + std::to_string(ckpt.tensors.size()) +
                                               " tensors, config implies " + std::to_string(expected.size()));
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const NamedTensor& t = ckpt.tensors[i];
    if (t.name != expected[i]->name)
      throw CheckpointError(Kind::kMismatch, "unexpected tensor " + t.name + " (expected " + expected[i]->name + ")");
    std::vector<std::uint32_t> dims(expected[i]->dims.begin(), expected[i]->dims.end());
    if (t.dims != dims) throw CheckpointError(Kind::kMismatch, "dims mismatch for tensor " + t.name);
  }
}

}  // namespace derain::nn
