#include "derain/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace derain {

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open manifest: " + path.string(), 0);
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_relative() ? base / fp : fp;
  };
  DatasetManifest manifest;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ManifestError("manifest line " + std::to_string(line_no) + ": expected rainy<TAB>clean", line_no);
    const std::string rainy = line.substr(0, tab);
    const std::string clean = line.substr(tab + 1);
    if (rainy.empty() || clean.empty() || clean.find('\t') != std::string::npos)
      throw ManifestError("manifest line " + std::to_string(line_no) + ": expected exactly two non-empty columns",
                          line_no);
    if (rainy == clean)
      throw ManifestError("manifest line " + std::to_string(line_no) + ": rainy and clean paths are identical",
                          line_no);
    manifest.push_back({resolve(rainy), resolve(clean)});
  }
  if (manifest.empty()) throw ManifestError("empty manifest: " + path.string(), 0);
  return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write manifest: " + path.string());
  for (const auto& e : manifest) out << e.rainy.string() << '\t' << e.clean.string() << '\n';
}

SamplePair load_pair(const ManifestEntry& entry) {
  SamplePair pair{load_image(entry.rainy), load_image(entry.clean)};
  if (!pair.rainy.same_shape(pair.clean))
    throw Error("pair dimensions differ: " + entry.rainy.string() + " vs " + entry.clean.string());
  return pair;
}

SamplePair random_crop_pair(const SamplePair& pair, int size, Rng& rng, bool flip) {
  if (!pair.rainy.same_shape(pair.clean)) throw Error("random_crop_pair: pair dimensions differ");
  const int w = pair.rainy.width();
  const int h = pair.rainy.height();
  if (size < 1 || w < size || h < size)
    throw Error("random_crop_pair: image " + std::to_string(w) + "x" + std::to_string(h) + " smaller than crop " +
                std::to_string(size));
  const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(w - size + 1)));
  const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(h - size + 1)));
  SamplePair out{crop(pair.rainy, x0, y0, size, size), crop(pair.clean, x0, y0, size, size)};
  if (flip && rng.coin()) {
    out.rainy = flip_horizontal(out.rainy);
    out.clean = flip_horizontal(out.clean);
  }
  return out;
}

void RainSynthParams::validate() const {
  if (!(density >= 0.0)) throw Error("rain synth: density must be >= 0");
  if (length < 1) throw Error("rain synth: length must be >= 1");
  if (!(intensity >= 0.0 && intensity <= 1.0)) throw Error("rain synth: intensity must be in [0, 1]");
  if (!(angle_min <= angle_max)) throw Error("rain synth: angle_min must be <= angle_max");
  if (!(blur_sigma >= 0.0)) throw Error("rain synth: blur sigma must be >= 0");
}

namespace {

ImagePlane gaussian_blur(const ImagePlane& src, double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  if (radius < 1) return src;
  std::vector<double> taps(2 * radius + 1);
  for (int k = -radius; k <= radius; ++k) taps[k + radius] = std::exp(-(k * k) / (2.0 * sigma * sigma));
  const int w = src.width();
  const int h = src.height();
  // Clipped and renormalized at the borders.
  auto pass = [&](const ImagePlane& in, bool horizontal) {
    ImagePlane out(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0.0, norm = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const int sx = horizontal ? x + k : x;
          const int sy = horizontal ? y : y + k;
          if (sx < 0 || sx >= w || sy < 0 || sy >= h) continue;
          acc += taps[k + radius] * in(sx, sy);
          norm += taps[k + radius];
        }
        out(x, y) = acc / norm;
      }
    return out;
  };
  return pass(pass(src, true), false);
}

}  // namespace

RainSample synthesize_rain(const ImageRGB& clean, const RainSynthParams& params, Rng& rng) {
  params.validate();
  const int w = clean.width();
  const int h = clean.height();
  ImagePlane streaks(w, h);
  const auto count = static_cast<long>(std::llround(params.density * w * h / 1000.0));
  std::vector<long> stamp(static_cast<std::size_t>(w) * h, -1);
  const double half = params.length / 2.0;
  for (long s = 0; s < count; ++s) {
    const double cx = rng.uniform(0.0, w);
    const double cy = rng.uniform(0.0, h);
    const double angle = rng.uniform(params.angle_min, params.angle_max) * std::numbers::pi / 180.0;
    const double level = rng.uniform(0.0, params.intensity);
    const double dx = std::sin(angle);
    const double dy = std::cos(angle);
    for (double t = -half; t <= half; t += 0.5) {
      const long px = std::lround(cx + t * dx);
      const long py = std::lround(cy + t * dy);
      if (px < 0 || px >= w || py < 0 || py >= h) continue;
      const std::size_t i = static_cast<std::size_t>(py) * w + px;
      if (stamp[i] == s) continue;
      stamp[i] = s;
      streaks[i] += level;
    }
  }
  if (params.blur_sigma > 0.0 && count > 0) streaks = gaussian_blur(streaks, params.blur_sigma);

  RainSample out{{clean, clean}, streaks};
  for (int c = 0; c < 3; ++c) {
    auto dst = out.pair.rainy.channel(c).samples();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::clamp(dst[i] + streaks[i], 0.0, 1.0);
  }
  return out;
}

RainSample synthesize_rain(const ImageRGB& clean, const RainSynthParams& params) {
  Rng rng(params.seed);
  return synthesize_rain(clean, params, rng);
}

ImageRGB procedural_scene(int width, int height, Rng& rng) {
  ImageRGB img(width, height);
  double top[3], bottom[3];
  for (int c = 0; c < 3; ++c) {
    top[c] = rng.uniform(0.1, 0.7);
    bottom[c] = rng.uniform(0.1, 0.7);
  }
  for (int y = 0; y < height; ++y) {
    const double t = height > 1 ? static_cast<double>(y) / (height - 1) : 0.0;
    for (int c = 0; c < 3; ++c) {
      const double v = top[c] * (1.0 - t) + bottom[c] * t;
      for (double& s : img.channel(c).row(y)) s = v;
    }
  }
  const int shapes = 3 + static_cast<int>(rng.below(4));
  for (int s = 0; s < shapes; ++s) {
    const bool disc = rng.coin();
    const double cx = rng.uniform(0.0, width);
    const double cy = rng.uniform(0.0, height);
    const double rx = rng.uniform(0.08, 0.3) * width;
    const double ry = rng.uniform(0.08, 0.3) * height;
    double color[3];
    for (double& v : color) v = rng.uniform(0.05, 0.75);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const double u = (x - cx) / rx;
        const double v = (y - cy) / ry;
        const bool inside = disc ? u * u + v * v <= 1.0 : std::abs(u) <= 1.0 && std::abs(v) <= 1.0;
        if (inside)
          for (int c = 0; c < 3; ++c) img.channel(c)(x, y) = color[c];
      }
  }
  const double fx = rng.uniform(0.05, 0.3);
  const double fy = rng.uniform(0.05, 0.3);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        double& v = img.channel(c)(x, y);
        v = std::clamp(v + 0.04 * std::sin(fx * x + fy * y + c), 0.0, 0.8);
      }
  return img;
}

DatasetManifest write_synthetic_dataset(const std::filesystem::path& dir, int count, int width, int height,
                                        const RainSynthParams& params, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  DatasetManifest manifest, relative;
  for (int i = 0; i < count; ++i) {
    Rng scene_rng = Rng::derive(seed, "scene" + std::to_string(i));
    Rng rain_rng = Rng::derive(seed, "rain" + std::to_string(i));
    const ImageRGB clean = procedural_scene(width, height, scene_rng);
    const RainSample sample = synthesize_rain(clean, params, rain_rng);
    const std::string stem = "pair" + std::to_string(i);
    ManifestEntry entry{dir / (stem + "_rainy.png"), dir / (stem + "_clean.png")};
    save_image(sample.pair.rainy, entry.rainy);
    save_image(sample.pair.clean, entry.clean);
    manifest.push_back(entry);
    relative.push_back({entry.rainy.filename(), entry.clean.filename()});
  }
  save_manifest(relative, dir / "manifest.tsv");
  return manifest;
}

}  // namespace derain
