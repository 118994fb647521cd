// Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails. Pass criterion names as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "derain/guided_filter.hpp"
#include "derain/metrics.hpp"
#include "derain/nn/loss.hpp"
#include "derain/train.hpp"
#include "support.hpp"

using namespace derain;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome filter_oracle() {
  constexpr double kTol = 1e-8;
  constexpr double kBudget = 60.0;
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const ImagePlane in = testing::random_plane(64, 64, 1000 + s);
    const ImagePlane g = testing::random_plane(64, 64, 2000 + s);
    for (int zeta : {2, 8})
      for (double lambda : {1e-4, 1e-2}) {
        FilterParams p;
        p.zeta = zeta;
        p.lambda = lambda;
        worst = std::max(worst, testing::max_abs_diff(iwgif_filter(in, g, p), naive_iwgif_oracle(in, g, p)));
      }
  }
  const double elapsed = seconds_since(t0);
  return {worst <= kTol && elapsed < kBudget,
          "max |diff| = " + fmt("%.3e", worst) + " (tol 1e-8), " + fmt("%.1f", elapsed) + " s (budget 60 s)"};
}

Outcome residual_identity() {
  constexpr double kTol = 1e-10;
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 3; ++s) {
    const ImagePlane in = testing::random_plane(12, 12, 3000 + s);
    const ImagePlane g = testing::random_plane(12, 12, 4000 + s);
    const FilterParams p{.zeta = 2, .lambda = 1e-2};
    const LocalStats st = local_stats(in, g, p.zeta);
    const ImagePlane gamma = edge_aware_weight(g, p.epsilon);
    const CoefficientField f = fit_linear_coefficients(st, gamma, p.lambda);
    const ImagePlane e = residual_energy(f.a, st, gamma, p.lambda);
    for (int y = 0; y < 12; ++y)
      for (int x = 0; x < 12; ++x) {
        const auto win = testing::window_at(x, y, 12, 12, p.zeta);
        double direct = 0.0;
        for (int yy = win.y0; yy <= win.y1; ++yy)
          for (int xx = win.x0; xx <= win.x1; ++xx) {
            const double r = f.a(x, y) * g(xx, yy) + f.b(x, y) - in(xx, yy);
            direct += r * r;
          }
        worst = std::max(worst, std::abs(e(x, y) - direct / win.count()));
      }
  }
  return {worst <= kTol, "max |diff| = " + fmt("%.3e", worst) + " (tol 1e-10)"};
}

double best_time(const std::function<void()>& fn, int reps) {
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = Clock::now();
    fn();
    best = std::min(best, seconds_since(t0));
  }
  return best;
}

Outcome linear_time() {
  const ImagePlane big = testing::random_plane(1024, 1024, 5000);
  const ImagePlane half = testing::random_plane(512, 512, 5001);
  auto run = [](const ImagePlane& p, int zeta) {
    return [&p, zeta] {
      FilterParams fp;
      fp.zeta = zeta;
      volatile double sink = iwgif_filter(p, p, fp)[0];
      (void)sink;
    };
  };
  const double t4 = best_time(run(big, 4), 3);
  const double t32 = best_time(run(big, 32), 3);
  const double t_half = best_time(run(half, 15), 5);
  const double t_full = best_time(run(big, 15), 3);
  const double radius_ratio = t32 / t4;
  const double size_ratio = t_full / t_half;
  return {radius_ratio <= 1.5 && size_ratio >= 3.0 && size_ratio <= 6.0,
          "t(zeta=32)/t(zeta=4) = " + fmt("%.3f", radius_ratio) + " (<= 1.5), t(1024^2)/t(512^2) = " +
              fmt("%.3f", size_ratio) + " (in [3, 6])"};
}

Outcome exact_identities() {
  std::vector<std::string> failed;
  // Constant image: exact fixed point.
  const ImagePlane flat(64, 48, 0.6235294117647059);
  const bool fixed_point = iwgif_filter(flat, flat, FilterParams{}) == flat;
  if (!fixed_point) failed.push_back("fixed point");

  // lambda = 0, self-guided: identity.
  FilterParams p0;
  p0.lambda = 0.0;
  p0.zeta = 4;
  const ImagePlane noise = testing::random_plane(64, 64, 6000);
  const double self_err = testing::max_abs_diff(iwgif_filter(noise, noise, p0), noise);
  if (!(self_err <= 1e-12)) failed.push_back("self-guided identity");

  // Decomposition of a realistic rainy image reconstructs it exactly.
  Rng scene_rng = Rng::derive(6001, "scene");
  RainSynthParams rain;
  rain.seed = 6002;
  const ImageRGB rainy = synthesize_rain(procedural_scene(96, 96, scene_rng), rain).pair.rainy;
  const Decomposition d = decompose(rainy, FilterParams{});
  const bool reconstructed = add(d.base, d.high) == rainy;
  if (!reconstructed) failed.push_back("reconstruction");

  // Offset equivariance.
  FilterParams p;
  p.zeta = 6;
  const ImagePlane g = testing::random_plane(64, 64, 6003);
  ImagePlane in_c = noise, g_c = g;
  for (double& v : in_c.samples()) v += 0.125;
  for (double& v : g_c.samples()) v += 0.125;
  ImagePlane expected = iwgif_filter(noise, g, p);
  for (double& v : expected.samples()) v += 0.125;
  const double offset_err = testing::max_abs_diff(iwgif_filter(in_c, g_c, p), expected);
  if (!(offset_err <= 1e-10)) failed.push_back("offset equivariance");

  std::string detail = std::string("fixed point ") + (fixed_point ? "exact" : "INEXACT") + ", self-guided " +
                       fmt("%.2e", self_err) + " (<= 1e-12), reconstruction " +
                       (reconstructed ? "exact" : "INEXACT") + ", offset " + fmt("%.2e", offset_err) + " (<= 1e-10)";
  return {failed.empty(), detail};
}

Outcome metrics() {
  const ImageRGB a{ImagePlane(32, 32, 0.3), ImagePlane(32, 32, 0.3), ImagePlane(32, 32, 0.3)};
  const double off = 16.0 / 255.0;
  const ImageRGB b{ImagePlane(32, 32, 0.3 + off), ImagePlane(32, 32, 0.3 + off), ImagePlane(32, 32, 0.3 + off)};
  const double analytic = 20.0 * std::log10(255.0 / 16.0);
  const double p = psnr(a, b);
  const ImageRGB x = testing::random_image(48, 40, 7000);
  const ImageRGB y = testing::random_image(48, 40, 7001);
  const double self = ssim(x, x);
  const double sym = std::abs(ssim(x, y) - ssim(y, x));
  const bool pass = std::abs(p - 24.048) <= 1e-3 && std::abs(p - analytic) <= 1e-9 && self == 1.0 && sym <= 1e-12;
  return {pass, "PSNR(offset 16/255) = " + fmt("%.6f", p) + " dB (24.048 +- 0.001), SSIM(I,I) = " +
                    fmt("%.17g", self) + ", |SSIM(a,b) - SSIM(b,a)| = " + fmt("%.2e", sym)};
}

Outcome loss() {
  const double c = 2.0 / 255.0;
  const double at0 = nn::psi(0.0, c);
  const double atc = nn::psi(c, c);
  double knee = 0.0;
  for (double z : {-c, c}) knee = std::max(knee, std::abs(std::abs(z) - (z * z + c * c) / (2 * c)));
  double deriv = 0.0;
  for (int i = -600; i <= 600; ++i) {
    const double z = 3.0 * c * i / 600.0;
    if (std::abs(std::abs(z) - c) < 1e-6) continue;  // the derivative jumps in curvature at the knee
    const double h = 1e-7;
    deriv = std::max(deriv, std::abs(nn::psi_prime(z, c) - (nn::psi(z + h, c) - nn::psi(z - h, c)) / (2 * h)));
  }
  const bool pass = std::abs(at0 - 1.0 / 255.0) <= 1e-15 && std::abs(atc - c) <= 1e-15 && knee <= 1e-12 &&
                    deriv <= 1e-6;
  return {pass, "psi(0) = " + fmt("%.12g", at0) + ", psi(c) = " + fmt("%.12g", atc) + ", knee gap " +
                    fmt("%.2e", knee) + " (<= 1e-12), max |psi' - numeric| = " + fmt("%.2e", deriv) + " (<= 1e-6)"};
}

Outcome gradients() {
  constexpr double kTol = 1e-4;
  const auto t0 = Clock::now();
  using testing::random_tensor;
  const nn::NetworkConfig cfg = testing::toy_network();
  testing::GradReport total;
  std::ostringstream parts;
  auto layer = [&](const char* name, auto& m, const nn::Tensor<double>& x, std::uint64_t seed) {
    std::vector<nn::Param<double>*> params;
    m.collect(params);
    testing::randomize(params, seed);
    const auto rep = testing::check_module(m, x, seed);
    parts << name << ' ' << fmt("%.1e", rep.max_rel_err) << ", ";
    total.merge(rep);
  };
  {
    nn::Conv2d<double> m("conv3", 8, 8, 3);
    layer("conv3x3", m, random_tensor(1, 8, 16, 16, 1), 2);
  }
  {
    nn::Conv2d<double> m("conv1", 16, 8, 1);
    layer("conv1x1", m, random_tensor(1, 16, 16, 16, 3), 4);
  }
  {
    nn::ChannelAttention<double> m("ca", 8, 2);
    layer("channel-att", m, random_tensor(1, 8, 16, 16, 5), 6);
  }
  {
    nn::SpatialAttention<double> m("sa", 7);
    layer("spatial-att", m, random_tensor(1, 8, 16, 16, 7), 8);
  }
  {
    nn::DualAttentionBlock<double> m("dab", cfg);
    layer("dab", m, random_tensor(1, 8, 16, 16, 9), 10);
  }
  {
    nn::ResidualGroup<double> m("rrg", cfg);
    layer("rrg", m, random_tensor(1, 8, 16, 16, 11), 12);
  }
  {
    nn::StreakGuide<double> m("rsgb", cfg);
    layer("rsgb", m, random_tensor(1, 3, 16, 16, 13), 14);
  }
  {
    nn::DerainNet<double> net(cfg);
    testing::randomize(net.parameters(), 15);
    const auto rep = testing::check_network(net, random_tensor(1, 3, 16, 16, 16, 0.5),
                                            random_tensor(1, 3, 16, 16, 17, 0.1), 18);
    parts << "network " << fmt("%.1e", rep.max_rel_err) << "; ";
    total.merge(rep);
  }
  const double elapsed = seconds_since(t0);
  std::string detail = parts.str() + std::to_string(total.checked) + " entries, max rel err " +
                       fmt("%.2e", total.max_rel_err) + " (<= 1e-4), " + fmt("%.1f", elapsed) + " s (budget 300 s)";
  if (total.max_rel_err > kTol) detail += "; worst " + total.worst;
  return {total.max_rel_err <= kTol && elapsed < 300.0, detail};
}

// ---- training criteria -----------------------------------------------------

constexpr std::uint64_t kDataSeed = 2024;

/// Four 64x64 synthetic pairs with the synthesizer's default parameters.
std::vector<SamplePair> overfit_pairs() {
  std::vector<SamplePair> pairs;
  for (int i = 0; i < 4; ++i) {
    Rng scene_rng = Rng::derive(kDataSeed, "scene" + std::to_string(i));
    Rng rain_rng = Rng::derive(kDataSeed, "rain" + std::to_string(i));
    pairs.push_back(synthesize_rain(procedural_scene(64, 64, scene_rng), RainSynthParams{}, rain_rng).pair);
  }
  return pairs;
}

TrainConfig overfit_config(std::uint64_t seed) {
  TrainConfig c = TrainConfig::desk();
  c.total_steps = 2000;
  c.batch_size = 4;
  c.seed = seed;
  c.log_interval = 500;
  return c;
}

double mean_input_psnr(const std::vector<SamplePair>& pairs) {
  double s = 0.0;
  for (const auto& p : pairs) s += psnr(p.rainy, p.clean);
  return s / static_cast<double>(pairs.size());
}

Outcome overfit() {
  const auto pairs = overfit_pairs();
  const TrainConfig c = overfit_config(1);
  const auto t0 = Clock::now();
  const TrainResult r = train(c, pairs, &std::cout);
  const double elapsed = seconds_since(t0);
  const double before = mean_input_psnr(pairs);
  const double after = evaluate(r.checkpoint, pairs, {}, c.filter).mean_psnr;
  return {after >= before + 3.0 && elapsed < 1800.0,
          "PSNR(I, B) = " + fmt("%.3f", before) + " dB, PSNR(B_hat, B) = " + fmt("%.3f", after) + " dB, gain " +
              fmt("%.3f", after - before) + " dB (>= 3), " + fmt("%.0f", elapsed) + " s (budget 1800 s)"};
}

Outcome ablation() {
  const auto pairs = overfit_pairs();
  const TrainConfig c = overfit_config(1);
  const AblationReport rep = ablate(c, pairs, pairs, {1, 2, 3}, nullptr);
  std::cout << rep.table();
  const bool has_rows = rep.runs.size() == 6;
  return {has_rows && rep.batches_paired() && rep.guided_wins() >= 2,
          "with-RSGB >= without in " + std::to_string(rep.guided_wins()) + " of 3 seeds (>= 2), batches paired: " +
              (rep.batches_paired() ? "yes" : "no")};
}

Outcome determinism() {
  const auto pairs = overfit_pairs();
  TrainConfig c = overfit_config(7);
  c.total_steps = 200;
  const TrainResult a = train(c, pairs);
  const TrainResult b = train(c, pairs);
  const auto bytes_a = nn::serialize(a.checkpoint);
  const bool identical = bytes_a == nn::serialize(b.checkpoint) && a.losses == b.losses;

  testing::TempDir dir("acceptance");
  nn::save_checkpoint(a.checkpoint, dir / "a.rsad");
  const nn::Checkpoint loaded = nn::load_checkpoint(dir / "a.rsad");
  const bool roundtrip = loaded == a.checkpoint && nn::serialize(loaded) == bytes_a;
  const bool eval_same = evaluate(a.checkpoint, pairs, {}, c.filter) == evaluate(loaded, pairs, {}, c.filter);
  return {identical && roundtrip && eval_same, std::string("seeded runs ") + (identical ? "bit-identical" : "DIFFER") +
                                                   ", round trip " + (roundtrip ? "bit-exact" : "INEXACT") +
                                                   ", evaluation " + (eval_same ? "unchanged" : "CHANGED")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"filter-oracle", filter_oracle},   {"residual-identity", residual_identity},
      {"linear-time", linear_time},       {"exact-identities", exact_identities},
      {"metrics", metrics},               {"loss", loss},
      {"gradients", gradients},           {"overfit", overfit},
      {"ablation", ablation},             {"determinism", determinism},
  };
  std::vector<std::string> only(argv + 1, argv + argc);
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    if (!o.pass) ++failures;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
