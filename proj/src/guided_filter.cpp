#include "derain/guided_filter.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace derain {

void FilterParams::validate() const {
  if (zeta < 1) throw Error("filter radius must be >= 1");
  if (!(lambda >= 0.0)) throw Error("lambda must be >= 0");
  if (!(epsilon > 0.0)) throw Error("epsilon must be > 0");
  if (!(eta > 0.0)) throw Error("eta must be > 0");
}

DegenerateWindowError::DegenerateWindowError(int x, int y)
    : Error("degenerate window at (" + std::to_string(x) + ", " + std::to_string(y) +
            "): zero guide variance with nonzero covariance and lambda = 0"),
      x_(x),
      y_(y) {}

ImagePlane edge_aware_weight(const ImagePlane& guide, double epsilon) {
  if (!(epsilon > 0.0)) throw Error("edge_aware_weight: epsilon must be > 0");
  const ImagePlane mean = box_mean(guide, 1);
  const ImagePlane mean_sq = box_mean(multiply(guide, guide), 1);
  ImagePlane gamma(guide.width(), guide.height());
  double inverse_sum = 0.0;
  for (std::size_t i = 0; i < guide.size(); ++i) {
    gamma[i] = std::max(0.0, mean_sq[i] - mean[i] * mean[i]) + epsilon;
    inverse_sum += 1.0 / gamma[i];
  }
  const double scale = inverse_sum / static_cast<double>(guide.size());
  for (double& g : gamma.samples()) g *= scale;
  return gamma;
}

CoefficientField fit_linear_coefficients(const LocalStats& stats, const ImagePlane& gamma, double lambda) {
  if (!(lambda >= 0.0)) throw Error("fit_linear_coefficients: lambda must be >= 0");
  if (!stats.var_g.same_shape(gamma) || !stats.cov_ig.same_shape(gamma) || !stats.mu_i.same_shape(gamma) ||
      !stats.mu_g.same_shape(gamma))
    throw Error("fit_linear_coefficients: dimension mismatch");
  const int w = gamma.width();
  CoefficientField field{ImagePlane(w, gamma.height()), ImagePlane(w, gamma.height())};
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    const double denom = gamma[i] * stats.var_g[i] + lambda;
    double a = 0.0;
    if (denom != 0.0) {
      a = gamma[i] * stats.cov_ig[i] / denom;
    } else if (stats.cov_ig[i] != 0.0) {
      throw DegenerateWindowError(static_cast<int>(i % w), static_cast<int>(i / w));
    }
    field.a[i] = a;
    field.b[i] = stats.mu_i[i] - a * stats.mu_g[i];
  }
  return field;
}

ImagePlane residual_energy(const ImagePlane& a, const LocalStats& stats, const ImagePlane& gamma, double lambda) {
  if (!a.same_shape(gamma) || !stats.var_i.same_shape(gamma) || !stats.var_g.same_shape(gamma))
    throw Error("residual_energy: dimension mismatch");
  ImagePlane energy(a.width(), a.height());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double e = stats.var_i[i] - a[i] * a[i] * (stats.var_g[i] + 2.0 * lambda / gamma[i]);
    energy[i] = std::max(0.0, e);
  }
  return energy;
}

ImagePlane aggregation_weight(const ImagePlane& energy, double eta) {
  if (!(eta > 0.0)) throw Error("aggregation_weight: eta must be > 0");
  ImagePlane weight(energy.width(), energy.height());
  for (std::size_t i = 0; i < energy.size(); ++i) weight[i] = std::exp(-energy[i] / eta) + 0.001;
  return weight;
}

ImagePlane weighted_box_mean(const ImagePlane& values, const ImagePlane& weights, int radius) {
  if (!values.same_shape(weights)) throw Error("weighted_box_mean: dimension mismatch");
  const double pivot = values[0];
  ImagePlane weighted(values.width(), values.height());
  for (std::size_t i = 0; i < values.size(); ++i) weighted[i] = weights[i] * (values[i] - pivot);
  const ImagePlane numer = box_sum_centered(weighted, radius, 0.0);
  const double weight_pivot = weights[0];
  ImagePlane out = box_sum_centered(weights, radius, weight_pivot);
  const int w = values.width();
  const int h = values.height();
  for (int y = 0; y < h; ++y) {
    auto row = out.row(y);
    const auto num = numer.row(y);
    for (int x = 0; x < w; ++x) {
      const double denom = row[x] + window_count(x, y, w, h, radius) * weight_pivot;
      row[x] = pivot + num[x] / denom;
    }
  }
  return out;
}

ImagePlane iwgif_filter(const ImagePlane& input, const ImagePlane& guide, const FilterParams& params) {
  params.validate();
  if (!input.same_shape(guide)) throw Error("iwgif_filter: input and guide differ in size");
  const ImagePlane gamma = edge_aware_weight(guide, params.epsilon);
  const LocalStats stats = local_stats(input, guide, params.zeta);
  const CoefficientField coef = fit_linear_coefficients(stats, gamma, params.lambda);
  const ImagePlane weight = aggregation_weight(residual_energy(coef.a, stats, gamma, params.lambda), params.eta);
  const ImagePlane a_bar = weighted_box_mean(coef.a, weight, params.zeta);
  const ImagePlane b_bar = weighted_box_mean(coef.b, weight, params.zeta);
  ImagePlane out(input.width(), input.height());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a_bar[i] * guide[i] + b_bar[i];
  return out;
}

ImagePlane naive_iwgif_oracle(const ImagePlane& input, const ImagePlane& guide, const FilterParams& params) {
  params.validate();
  if (!input.same_shape(guide)) throw Error("naive_iwgif_oracle: input and guide differ in size");
  const int w = input.width();
  const int h = input.height();
  if (w > 128 || h > 128) throw Error("naive_iwgif_oracle: image exceeds the 128x128 size guard");
  const std::size_t m = input.size();

  struct Window {
    int x0, x1, y0, y1;
    double count() const { return static_cast<double>((x1 - x0 + 1) * (y1 - y0 + 1)); }
  };
  auto window = [&](int x, int y, int r) {
    return Window{std::max(0, x - r), std::min(w - 1, x + r), std::max(0, y - r), std::min(h - 1, y + r)};
  };

  // Radius-1 variances, two-pass.
  std::vector<double> var1(m);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const Window win = window(x, y, 1);
      double mean = 0.0;
      for (int v = win.y0; v <= win.y1; ++v)
        for (int u = win.x0; u <= win.x1; ++u) mean += guide(u, v);
      mean /= win.count();
      double var = 0.0;
      for (int v = win.y0; v <= win.y1; ++v)
        for (int u = win.x0; u <= win.x1; ++u) var += (guide(u, v) - mean) * (guide(u, v) - mean);
      var1[static_cast<std::size_t>(y) * w + x] = var / win.count();
    }

  // Edge-aware weighting as a literal double sum.
  std::vector<double> gamma(m);
  for (std::size_t q = 0; q < m; ++q) {
    double sum = 0.0;
    for (std::size_t p = 0; p < m; ++p) sum += (var1[q] + params.epsilon) / (var1[p] + params.epsilon);
    gamma[q] = sum / static_cast<double>(m);
  }

  std::vector<double> a(m), b(m), weight(m);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t q = static_cast<std::size_t>(y) * w + x;
      const Window win = window(x, y, params.zeta);
      double mu_g = 0.0, mu_i = 0.0;
      for (int v = win.y0; v <= win.y1; ++v)
        for (int u = win.x0; u <= win.x1; ++u) {
          mu_g += guide(u, v);
          mu_i += input(u, v);
        }
      mu_g /= win.count();
      mu_i /= win.count();
      double var_g = 0.0, cov = 0.0;
      for (int v = win.y0; v <= win.y1; ++v)
        for (int u = win.x0; u <= win.x1; ++u) {
          var_g += (guide(u, v) - mu_g) * (guide(u, v) - mu_g);
          cov += (guide(u, v) - mu_g) * (input(u, v) - mu_i);
        }
      var_g /= win.count();
      cov /= win.count();
      const double denom = gamma[q] * var_g + params.lambda;
      if (denom == 0.0 && cov != 0.0) throw DegenerateWindowError(x, y);
      a[q] = denom == 0.0 ? 0.0 : gamma[q] * cov / denom;
      b[q] = mu_i - a[q] * mu_g;
      double residual = 0.0;
      for (int v = win.y0; v <= win.y1; ++v)
        for (int u = win.x0; u <= win.x1; ++u) {
          const double r = a[q] * guide(u, v) + b[q] - input(u, v);
          residual += r * r;
        }
      weight[q] = std::exp(-(residual / win.count()) / params.eta) + 0.001;
    }

  ImagePlane out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const Window win = window(x, y, params.zeta);
      double sum_wa = 0.0, sum_wb = 0.0, sum_w = 0.0;
      for (int v = win.y0; v <= win.y1; ++v)
        for (int u = win.x0; u <= win.x1; ++u) {
          const std::size_t q = static_cast<std::size_t>(v) * w + u;
          sum_wa += weight[q] * a[q];
          sum_wb += weight[q] * b[q];
          sum_w += weight[q];
        }
      out(x, y) = sum_wa / sum_w * guide(x, y) + sum_wb / sum_w;
    }
  return out;
}

Decomposition decompose(const ImageRGB& img, const FilterParams& params, bool luma_guide) {
  params.validate();
  Decomposition d{ImageRGB(img.width(), img.height()), ImageRGB(img.width(), img.height())};
  const ImagePlane luma = luma_guide ? to_luminance(img) : ImagePlane();
  for (int c = 0; c < 3; ++c) {
    const ImagePlane& channel = img.channel(c);
    const ImagePlane filtered = iwgif_filter(channel, luma_guide ? luma : channel, params);
    ImagePlane& base = d.base.channel(c);
    ImagePlane& high = d.high.channel(c);
    for (std::size_t i = 0; i < channel.size(); ++i) {
      high[i] = channel[i] - filtered[i];
      // Re-derive the base from the stored residual; removes most rounding
      // mismatches between base + high and the input.
      base[i] = channel[i] - high[i];
    }
  }
  return d;
}

ImageRGB encode_high(const ImageRGB& high) {
  ImageRGB out = high;
  for (int c = 0; c < 3; ++c)
    for (double& v : out.channel(c).samples()) v += 0.5;
  return out;
}

ImageRGB decode_high(const ImageRGB& encoded) {
  ImageRGB out = encoded;
  for (int c = 0; c < 3; ++c)
    for (double& v : out.channel(c).samples()) v -= 0.5;
  return out;
}

}  // namespace derain
