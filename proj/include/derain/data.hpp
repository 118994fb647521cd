#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "derain/image.hpp"
#include "derain/random.hpp"

namespace derain {

struct SamplePair {
  ImageRGB rainy;
  ImageRGB clean;
};

struct ManifestEntry {
  std::filesystem::path rainy;
  std::filesystem::path clean;
};

using DatasetManifest = std::vector<ManifestEntry>;

class ManifestError : public Error {
 public:
  ManifestError(const std::string& what, int line) : Error(what), line_(line) {}
  /// 1-based line number, or 0 when the error is not tied to a line.
  int line() const { return line_; }

 private:
  int line_;
};

/// Parses `rainy<TAB>clean` lines; blank lines and '#' comments are skipped.
/// Relative paths resolve against the manifest's directory.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

SamplePair load_pair(const ManifestEntry& entry);

/// Same random window cut from both images, then a shared horizontal flip with
/// probability 0.5 when `flip` is set.
SamplePair random_crop_pair(const SamplePair& pair, int size, Rng& rng, bool flip = true);

struct RainSynthParams {
  double density = 4.0;       ///< streaks per 1000 pixels
  int length = 12;            ///< streak length in pixels
  double angle_min = -20.0;   ///< degrees from vertical
  double angle_max = 20.0;
  double intensity = 0.6;     ///< per-streak brightness is uniform in [0, intensity]
  double blur_sigma = 0.8;    ///< gaussian blur of the streak layer; 0 disables
  std::uint64_t seed = 0;

  void validate() const;
};

struct RainSample {
  SamplePair pair;
  ImagePlane streaks;  ///< the additive layer before clamping
};

/// rainy = clamp(clean + S, 0, 1) with S a non-negative layer of blurred line
/// segments shared by all channels. Streak draws are sequential, so a higher
/// density with the same seed adds streaks on top of the lower-density layer.
RainSample synthesize_rain(const ImageRGB& clean, const RainSynthParams& params, Rng& rng);
RainSample synthesize_rain(const ImageRGB& clean, const RainSynthParams& params);

/// Procedural clean scene (gradient background, flat shapes, mild texture)
/// for desk-scale experiments without an external corpus.
ImageRGB procedural_scene(int width, int height, Rng& rng);

/// Writes `count` synthetic pairs plus a manifest into `dir`.
DatasetManifest write_synthetic_dataset(const std::filesystem::path& dir, int count, int width, int height,
                                        const RainSynthParams& params, std::uint64_t seed);

}  // namespace derain
