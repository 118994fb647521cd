#include "derain/nn/network.hpp"

#include <cmath>

#include "derain/random.hpp"

namespace derain::nn {

void NetworkConfig::validate() const {
  if (n_rrg < 1) throw Error("network config: n_rrg must be >= 1");
  if (n_dab_per_rrg < 1) throw Error("network config: n_dab_per_rrg must be >= 1");
  if (ca_reduction < 1) throw Error("network config: ca_reduction must be >= 1");
  if (channels < ca_reduction * 4)
    throw Error("network config: channels (" + std::to_string(channels) + ") must be >= 4 * ca_reduction (" +
                std::to_string(ca_reduction) + ")");
  if (channels % ca_reduction != 0) throw Error("network config: channels must be divisible by ca_reduction");
  if (sa_kernel % 2 == 0) throw Error("network config: sa_kernel must be odd");
}

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

bool zero_initialized(const std::string& name) {
  return name == "tail.weight" || name == "tail.bias" || ends_with(name, ".ca.up.weight") ||
         ends_with(name, ".ca.up.bias") || ends_with(name, ".sa.conv.weight") || ends_with(name, ".sa.conv.bias");
}

template <typename T>
void initialize(DerainNet<T>& net, std::uint64_t seed) {
  for (auto* p : net.parameters()) {
    if (zero_initialized(p->name)) {
      std::fill(p->value.begin(), p->value.end(), T(0));
      continue;
    }
    // Weight dims are (out, in, k, k); a bias shares its weight's fan-in.
    const std::string weight_name =
        ends_with(p->name, ".bias") ? p->name.substr(0, p->name.size() - 5) + ".weight" : p->name;
    int fan_in = 1;
    for (auto* q : net.parameters())
      if (q->name == weight_name) fan_in = q->dims[1] * q->dims[2] * q->dims[3];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Rng rng = Rng::derive(seed, p->name);
    for (T& v : p->value) v = static_cast<T>(rng.uniform(-bound, bound));
  }
}

template void initialize<float>(DerainNet<float>&, std::uint64_t);
template void initialize<double>(DerainNet<double>&, std::uint64_t);

}  // namespace derain::nn
