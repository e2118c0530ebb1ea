#pragma once

#include <span>

#include "pansharp/raster.hpp"

namespace pansharp::metrics {

struct MetricConfig {
  i64 q_window = 32;  // UIQI / Q2n block size
  i64 q_stride = 32;  // disjoint blocks by default
  int ratio = 4;      // ERGAS resolution ratio
  i64 sigma = 4;      // local-correlation window (R by default)
  double eps = 1e-8;  // variance floor / invalidity threshold

  void validate() const;
};

struct CorrResult {
  double value = 0.0;  // clamped to [-1, 1]
  bool valid = false;  // false when either variance < eps
};

// Pearson correlation with floored denominator (population statistics).
CorrResult corrcoef(std::span<const double> x, std::span<const double> y,
                    double eps = 1e-8);

// Per-pixel windowed correlation against a single-band reference.
// values are pixel-aligned: the entry at (b, i, j) describes the
// window whose top-left corner is (i - window/2, j - window/2); border
// pixels without a full window and flat windows are invalid.
struct CorrelationField {
  i64 bands = 0, height = 0, width = 0;
  i64 window = 0;
  std::vector<double> values;
  Mask mask;

  double at(i64 b, i64 y, i64 x) const {
    return values[static_cast<size_t>((b * height + y) * width + x)];
  }
};

CorrelationField local_correlation_field(const Raster& a, const Raster& bands,
                                         i64 sigma, double eps = 1e-8);

double uiqi(const Raster& x, const Raster& y, const MetricConfig& cfg);
double q2n(const Raster& x, const Raster& y, const MetricConfig& cfg);
double ergas(const Raster& y, const Raster& xref, int ratio);
double d_lambda_khan(const Raster& y_down, const Raster& m, const MetricConfig& cfg);
double d_rho(const Raster& mhat, const Raster& pan, const CorrelationField& rho_max,
             i64 sigma, double eps = 1e-8);

// Differentiable builders. All raster-level metrics above are thin
// wrappers over these evaluated on untracked tensors, so loss-time and
// metric-time values agree exactly.

// Windowed correlation on the window-anchor grid: rho is
// (1,B,h-sigma+1,w-sigma+1); valid is an untracked 0/1 tensor of the
// same shape (flat windows excluded).
struct LocalCorr {
  ad::Tensor rho;
  ad::Tensor valid;
};
LocalCorr local_corr_anchor(const ad::Tensor& p, const ad::Tensor& m, i64 sigma,
                            double eps);

ad::Tensor uiqi_t(const ad::Tensor& x, const ad::Tensor& y, const MetricConfig& cfg);
ad::Tensor q2n_t(const ad::Tensor& x, const ad::Tensor& y, const MetricConfig& cfg);
ad::Tensor ergas_t(const ad::Tensor& y, const ad::Tensor& xref, int ratio);
ad::Tensor d_lambda_khan_t(const ad::Tensor& y_down, const ad::Tensor& m,
                           const MetricConfig& cfg);
// Masked mean of (1 - rho) over windows where rho < rho_max; the step
// mask and validity are detached constants, the denominator counts all
// jointly valid windows. stats, when given, receives the step-mask and
// support window counts.
struct DRhoStats {
  i64 active = 0;
  i64 support = 0;
};
ad::Tensor d_rho_t(const ad::Tensor& mhat, const ad::Tensor& pan,
                   const CorrelationField& rho_max, i64 sigma, double eps,
                   DRhoStats* stats = nullptr);

// Hypercomplex (Cayley-Dickson) basis product: e_i * e_j = sign * e_k.
// Exposed for the Q2n tests.
struct CDEntry {
  int k;
  int sign;
};
std::vector<std::vector<CDEntry>> cayley_dickson_table(int dim);

}  // namespace pansharp::metrics
