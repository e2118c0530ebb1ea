#pragma once

#include <array>
#include <vector>

#include "pansharp/metrics.hpp"
#include "pansharp/raster.hpp"

namespace pansharp::coreg {

// Half-pixel search grid {-3, -2.5, ..., +3} on both axes, 169 candidates.
inline constexpr int kGridSteps = 13;
inline constexpr double kGridSpacing = 0.5;
inline constexpr double kGridMax = 3.0;

// Score windows are restricted to anchors at least this many pixels away
// from every border; |shift| <= 3, so all 169 candidates share one anchor
// set and their mean correlations are directly comparable.
inline constexpr i64 kSearchMargin = 4;

// Per-band PAN-scale shift (dx_b, dy_b) applied to the low-passed PAN to
// best align it with upsampled band b.
struct AlignmentVector {
  std::vector<std::array<double, 2>> shifts;

  // Components on the half-pixel grid within +-3.
  void validate() const;
};

struct CoregistrationProduct {
  metrics::CorrelationField rho_max;  // window = R*R
  AlignmentVector a;
  std::vector<double> scores;       // mean valid correlation at a_b
  std::vector<double> zero_scores;  // same, at shift (0, 0)
};

struct SearchConfig {
  double eps = 1e-8;
  // Evaluate rho_max at zero shift instead of at the per-band optima
  // (the shifts are estimated either way).
  bool rho_max_at_zero_shift = false;
};

// Correlation field between the low-passed PAN and the upsampled MS at
// zero shift, window R*R.
metrics::CorrelationField reference_correlation_field(const Raster& pan,
                                                      const Raster& ms,
                                                      const SensorSpec& spec);

// Exhaustive per-band search over the 169 grid candidates for the shift
// of the low-passed PAN that maximizes mean valid windowed correlation
// with the upsampled band. Ties break by smaller |s|, then
// lexicographically by (dx, dy). Throws InsufficientSupport when the
// image leaves no scorable windows (too small, or a band is flat under
// every candidate).
CoregistrationProduct estimate_band_shifts(const Raster& pan, const Raster& ms,
                                           const SensorSpec& spec,
                                           const SearchConfig& cfg = {});

}  // namespace pansharp::coreg
