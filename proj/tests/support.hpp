// Shared helpers for the test binaries: deterministic random inputs, slow
// reference implementations and a finite-difference gradient checker.
#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "derain/image.hpp"
#include "derain/nn/network.hpp"

namespace testing {

using derain::ImagePlane;
using derain::ImageRGB;

inline ImagePlane random_plane(int w, int h, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  ImagePlane p(w, h);
  for (double& v : p.samples()) v = dist(gen);
  return p;
}

inline ImageRGB random_image(int w, int h, std::uint64_t seed) {
  return {random_plane(w, h, seed), random_plane(w, h, seed + 1), random_plane(w, h, seed + 2)};
}

/// Smooth gradient plus a few sharp bars, closer to a natural image than noise.
inline ImageRGB structured_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> jitter(-0.02, 0.02);
  ImageRGB img{ImagePlane(w, h), ImagePlane(w, h), ImagePlane(w, h)};
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double v = 0.2 + 0.5 * x / w + 0.1 * c + jitter(gen);
        if ((x / 7 + y / 11) % 3 == 0) v += 0.2;
        img.channel(c)(x, y) = std::clamp(v, 0.0, 1.0);
      }
  return img;
}

struct Window {
  int x0, x1, y0, y1;
  int count() const { return (x1 - x0 + 1) * (y1 - y0 + 1); }
};

inline Window window_at(int x, int y, int w, int h, int r) {
  return {std::max(0, x - r), std::min(w - 1, x + r), std::max(0, y - r), std::min(h - 1, y + r)};
}

inline ImagePlane naive_box_mean(const ImagePlane& p, int r) {
  ImagePlane out(p.width(), p.height());
  for (int y = 0; y < p.height(); ++y)
    for (int x = 0; x < p.width(); ++x) {
      const Window win = window_at(x, y, p.width(), p.height(), r);
      double s = 0.0;
      for (int yy = win.y0; yy <= win.y1; ++yy)
        for (int xx = win.x0; xx <= win.x1; ++xx) s += p(xx, yy);
      out(x, y) = s / win.count();
    }
  return out;
}

struct NaiveStats {
  double mu_g, mu_i, var_g, cov, var_i;
};

/// Two-pass moments over one clipped window.
inline NaiveStats naive_stats(const ImagePlane& in, const ImagePlane& g, int x, int y, int r) {
  const Window win = window_at(x, y, in.width(), in.height(), r);
  NaiveStats s{0, 0, 0, 0, 0};
  for (int yy = win.y0; yy <= win.y1; ++yy)
    for (int xx = win.x0; xx <= win.x1; ++xx) {
      s.mu_g += g(xx, yy);
      s.mu_i += in(xx, yy);
    }
  s.mu_g /= win.count();
  s.mu_i /= win.count();
  for (int yy = win.y0; yy <= win.y1; ++yy)
    for (int xx = win.x0; xx <= win.x1; ++xx) {
      const double dg = g(xx, yy) - s.mu_g;
      const double di = in(xx, yy) - s.mu_i;
      s.var_g += dg * dg;
      s.cov += dg * di;
      s.var_i += di * di;
    }
  s.var_g /= win.count();
  s.cov /= win.count();
  s.var_i /= win.count();
  return s;
}

inline double max_abs_diff(const ImagePlane& a, const ImagePlane& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double max_abs_diff(const ImageRGB& a, const ImageRGB& b) {
  return std::max({max_abs_diff(a.r, b.r), max_abs_diff(a.g, b.g), max_abs_diff(a.b, b.b)});
}

/// Gaussian-window SSIM evaluated window by window with explicit loops.
inline double naive_ssim_plane(const ImagePlane& a, const ImagePlane& b) {
  constexpr int r = 5;
  constexpr double sigma = 1.5, c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double kernel[2 * r + 1][2 * r + 1];
  double total = 0.0;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      kernel[dy + r][dx + r] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
      total += kernel[dy + r][dx + r];
    }
  double sum = 0.0;
  int n = 0;
  for (int y = r; y < a.height() - r; ++y)
    for (int x = r; x < a.width() - r; ++x) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const double k = kernel[dy + r][dx + r] / total;
          ma += k * a(x + dx, y + dy);
          mb += k * b(x + dx, y + dy);
        }
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const double k = kernel[dy + r][dx + r] / total;
          const double da = a(x + dx, y + dy) - ma, db = b(x + dx, y + dy) - mb;
          saa += k * da * da;
          sbb += k * db * db;
          sab += k * da * db;
        }
      sum += ((2 * ma * mb + c1) * (2 * sab + c2)) / ((ma * ma + mb * mb + c1) * (saa + sbb + c2));
      ++n;
    }
  return sum / n;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("derain_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// ---- finite-difference gradient checks -------------------------------------

using derain::nn::Param;
using derain::nn::Tensor;

inline Tensor<double> random_tensor(int n, int c, int h, int w, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  Tensor<double> t(n, c, h, w);
  for (double& v : t.data) v = dist(gen);
  return t;
}

inline void randomize(const std::vector<Param<double>*>& params, std::uint64_t seed, double scale = 0.3) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (auto* p : params)
    for (double& v : p->value) v = dist(gen);
}

inline double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

struct GradReport {
  double max_rel_err = 0.0;
  std::string worst;
  std::size_t checked = 0;

  void add(double analytic, double numeric, const std::string& what) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), kFloor});
    const double err = std::abs(analytic - numeric) / denom;
    ++checked;
    if (err > max_rel_err || !std::isfinite(err)) {
      max_rel_err = std::isfinite(err) ? err : INFINITY;
      worst = what + " analytic=" + std::to_string(analytic) + " numeric=" + std::to_string(numeric);
    }
  }

  void merge(const GradReport& o) {
    checked += o.checked;
    if (o.max_rel_err > max_rel_err) {
      max_rel_err = o.max_rel_err;
      worst = o.worst;
    }
  }

  /// Gradients below this magnitude are compared in absolute terms; at the
  /// finite-difference step used here, round-off in the numeric estimate is
  /// around 1e-10, which would swamp a purely relative comparison.
  static constexpr double kFloor = 1e-5;
};

inline constexpr double kFdStep = 1e-5;

/// Checks a module with forward(Tensor) / backward(Tensor) / collect(params)
/// against central differences of the scalar loss sum(w * forward(x)).
template <typename Module>
GradReport check_module(Module& m, Tensor<double> x, std::uint64_t seed) {
  std::vector<Param<double>*> params;
  m.collect(params);
  const Tensor<double> y0 = m.forward(x);
  const Tensor<double> w = random_tensor(y0.n, y0.c, y0.h, y0.w, seed ^ 0x5eedULL);
  for (auto* p : params) p->zero_grad();
  m.forward(x);
  const Tensor<double> dx = m.backward(w);

  auto loss = [&] { return dot(m.forward(x), w); };
  GradReport rep;
  for (auto* p : params)
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double keep = p->value[i];
      p->value[i] = keep + kFdStep;
      const double up = loss();
      p->value[i] = keep - kFdStep;
      const double down = loss();
      p->value[i] = keep;
      rep.add(p->grad[i], (up - down) / (2 * kFdStep), p->name + "[" + std::to_string(i) + "]");
    }
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x.data[i];
    x.data[i] = keep + kFdStep;
    const double up = loss();
    x.data[i] = keep - kFdStep;
    const double down = loss();
    x.data[i] = keep;
    rep.add(dx.data[i], (up - down) / (2 * kFdStep), "input[" + std::to_string(i) + "]");
  }
  return rep;
}

/// Same check for the whole network, including both of its inputs.
inline GradReport check_network(derain::nn::DerainNet<double>& net, Tensor<double> input, Tensor<double> high,
                                std::uint64_t seed) {
  const auto params = net.parameters();
  const Tensor<double> y0 = net.forward(input, high);
  const Tensor<double> w = random_tensor(y0.n, y0.c, y0.h, y0.w, seed ^ 0x5eedULL);
  net.zero_grad();
  net.forward(input, high);
  const auto grads = net.backward(w);

  auto loss = [&] { return dot(net.forward(input, high), w); };
  auto probe = [&](double& slot) {
    const double keep = slot;
    slot = keep + kFdStep;
    const double up = loss();
    slot = keep - kFdStep;
    const double down = loss();
    slot = keep;
    return (up - down) / (2 * kFdStep);
  };
  GradReport rep;
  for (auto* p : params)
    for (std::size_t i = 0; i < p->size(); ++i)
      rep.add(p->grad[i], probe(p->value[i]), p->name + "[" + std::to_string(i) + "]");
  for (std::size_t i = 0; i < input.size(); ++i)
    rep.add(grads.d_input.data[i], probe(input.data[i]), "input[" + std::to_string(i) + "]");
  if (net.config().use_rsgb)
    for (std::size_t i = 0; i < high.size(); ++i)
      rep.add(grads.d_high.data[i], probe(high.data[i]), "high[" + std::to_string(i) + "]");
  return rep;
}

/// The small network used by the gradient checks: 1 group of 2 blocks, 8 channels.
inline derain::nn::NetworkConfig toy_network() {
  derain::nn::NetworkConfig cfg;
  cfg.n_rrg = 1;
  cfg.n_dab_per_rrg = 2;
  cfg.channels = 8;
  cfg.ca_reduction = 2;
  return cfg;
}

}  // namespace testing
