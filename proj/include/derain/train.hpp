#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "derain/data.hpp"
#include "derain/guided_filter.hpp"
#include "derain/nn/checkpoint.hpp"
#include "derain/nn/network.hpp"

namespace derain {

struct TrainConfig {
  nn::NetworkConfig network;
  FilterParams filter;
  bool luma_guide = false;
  double lr_max = 1e-4;
  double lr_min = 1e-6;
  std::uint64_t total_steps = 100000;
  int batch_size = 16;
  int crop = 128;
  double loss_c = 2.0 / 255.0;
  std::uint64_t seed = 0;
  std::filesystem::path checkpoint_path;
  std::uint64_t log_interval = 100;

  /// 4 groups x 8 blocks, 64 channels, 128 px crops, batch 16.
  static TrainConfig paper();
  /// 1 group x 2 blocks, 16 channels, 64 px crops, batch 4, 2000 steps.
  static TrainConfig desk();

  void validate() const;
  /// Applies one `key = value` setting; throws on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  std::string fingerprint() const;
};

/// Reads a flat `key = value` file on top of `base`. '#' starts a comment.
TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base);

class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, std::uint64_t step) : Error(what), step_(step) {}
  std::uint64_t step() const { return step_; }

 private:
  std::uint64_t step_;
};

struct TrainResult {
  nn::Checkpoint checkpoint;
  std::vector<double> losses;                ///< loss of every step, before its update
  std::vector<std::uint64_t> batch_digests;  ///< hash of every batch's input bytes
};

/// Runs the full loop (crop, decompose, forward, loss, backward, Adam with a
/// cosine schedule). Log lines `step=<n> lr=<f> loss=<f>` go to `log` when set.
TrainResult train(const TrainConfig& config, const std::vector<SamplePair>& data, std::ostream* log = nullptr);
TrainResult train(const TrainConfig& config, const DatasetManifest& manifest, std::ostream* log = nullptr);

struct EvalEntry {
  std::string name;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct EvalReport {
  std::vector<EvalEntry> entries;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  std::string fingerprint;

  bool operator==(const EvalReport& o) const;
};

/// Restores each rainy image whole and scores the clamped result against the clean one.
EvalReport evaluate(const nn::Checkpoint& ckpt, const std::vector<SamplePair>& data,
                    const std::vector<std::string>& names, const FilterParams& filter, bool luma_guide = false);
EvalReport evaluate(const nn::Checkpoint& ckpt, const DatasetManifest& manifest, const FilterParams& filter,
                    bool luma_guide = false);

/// Restores one image with a loaded network.
ImageRGB restore(nn::DerainNet<float>& net, const ImageRGB& rainy, const FilterParams& filter, bool luma_guide);

std::string format_eval_report(const EvalReport& report);

struct AblationRun {
  std::uint64_t seed = 0;
  bool use_rsgb = true;
  EvalReport report;
  std::vector<std::uint64_t> batch_digests;
};

struct AblationReport {
  std::vector<AblationRun> runs;  ///< per seed: without guide blocks, then with

  /// Seeds where the guided model's mean PSNR is at least the unguided one's.
  int guided_wins() const;
  /// Every seed's two runs consumed identical batches.
  bool batches_paired() const;
  /// Tab-separated table: one row per run, then one mean row per mode.
  std::string table() const;
};

AblationReport ablate(const TrainConfig& config, const std::vector<SamplePair>& train_data,
                      const std::vector<SamplePair>& eval_data, const std::vector<std::uint64_t>& seeds,
                      std::ostream* log = nullptr);

std::vector<SamplePair> load_pairs(const DatasetManifest& manifest);

}  // namespace derain
