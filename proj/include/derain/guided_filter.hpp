#pragma once

#include "derain/image.hpp"

namespace derain {

/// Configuration of the improved weighted guided filter.
struct FilterParams {
  int zeta = 15;           ///< window radius in pixels
  double lambda = 1e-4;    ///< ridge penalty on the slope a
  double epsilon = 1e-6;   ///< stabilizer of the edge-aware weighting
  double eta = 1e-3;       ///< temperature of the aggregation weights

  void validate() const;
};

/// Per-window linear model I ~ a*G + b, indexed by the window center.
struct CoefficientField {
  ImagePlane a;
  ImagePlane b;
};

/// Thrown when lambda = 0 and a window has zero guide variance but a nonzero covariance.
class DegenerateWindowError : public Error {
 public:
  DegenerateWindowError(int x, int y);
  int x() const { return x_; }
  int y() const { return y_; }

 private:
  int x_, y_;
};

struct Decomposition {
  ImageRGB base;
  ImageRGB high;  ///< signed, input - base
};

/// Edge-aware weighting built from radius-1 local variances of the guide:
///   gamma(p') = (var(p') + eps) / M * sum_p 1 / (var(p) + eps)
/// The sum is taken once, so the cost is O(M). The harmonic mean of gamma is 1.
ImagePlane edge_aware_weight(const ImagePlane& guide, double epsilon);

CoefficientField fit_linear_coefficients(const LocalStats& stats, const ImagePlane& gamma, double lambda);

/// Mean squared residual of each window's fit, from window moments alone:
///   E = var_I - a^2 (var_G + 2 lambda / gamma), clamped at 0.
ImagePlane residual_energy(const ImagePlane& a, const LocalStats& stats, const ImagePlane& gamma, double lambda);

/// W = exp(-E / eta) + 0.001
ImagePlane aggregation_weight(const ImagePlane& energy, double eta);

/// Weighted mean of `values` over the clipped window at every pixel, using
/// integral tables of weights*values and weights.
ImagePlane weighted_box_mean(const ImagePlane& values, const ImagePlane& weights, int radius);

ImagePlane iwgif_filter(const ImagePlane& input, const ImagePlane& guide, const FilterParams& params);

/// Literal per-window evaluation of the same filter with explicit loops and
/// direct residual sums. Reference only; refuses images larger than 128x128.
ImagePlane naive_iwgif_oracle(const ImagePlane& input, const ImagePlane& guide, const FilterParams& params);

/// Splits an image into a filtered base layer and the signed high-frequency
/// residual. Each channel guides itself unless `luma_guide` is set, in which
/// case the luminance of the image guides all three channels.
Decomposition decompose(const ImageRGB& img, const FilterParams& params, bool luma_guide = false);

/// Encodes a signed high layer for 8-bit export as 0.5 + high (clamped on save).
ImageRGB encode_high(const ImageRGB& high);
ImageRGB decode_high(const ImageRGB& encoded);

}  // namespace derain
