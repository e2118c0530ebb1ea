#pragma once

#include "pansharp/coregistration.hpp"
#include "pansharp/metrics.hpp"
#include "pansharp/raster.hpp"

namespace pansharp::loss {

// Spectral term choices: Khan's index plus weighted ERGAS, or a plain
// L1 ablation baseline.
enum class SpectralVariant { KhanErgas, L1 };

struct LossConfig {
  double gamma = 0.05;  // ERGAS weight; tuned on synthetic scenes
  double beta = 1.0;    // spatial weight; tuned on synthetic scenes
  i64 sigma = 4;        // local-correlation window at PAN scale
  bool alignment_enabled = true;
  SpectralVariant variant = SpectralVariant::KhanErgas;
  double eps = 1e-8;

  void validate() const;
};

struct LossBreakdown {
  double total = 0.0;
  double spectral_dlambda = 0.0;
  double spectral_ergas = 0.0;
  double spatial = 0.0;
  // Share of jointly valid correlation windows with the step mask on.
  double fraction_active = 0.0;
};

// Shifts each band of mhat by a, MTF-downscales, and scores against m:
// d_lambda_khan + gamma * ergas. Shifting is skipped when alignment is
// disabled. mhat is (1,B,H,W) at PAN scale.
ad::Tensor spectral_loss(const ad::Tensor& mhat, const Raster& m,
                         const coreg::AlignmentVector& a, const SensorSpec& spec,
                         const LossConfig& cfg, LossBreakdown* bd = nullptr);

// Masked mean of (1 - rho^sigma) against the reference field. The step
// mask is detached, so the detached value equals the d_rho metric at
// the same point exactly.
ad::Tensor spatial_loss(const ad::Tensor& mhat, const Raster& pan,
                        const metrics::CorrelationField& rho_max,
                        const LossConfig& cfg, double* fraction_active = nullptr);

// spectral + beta * spatial, with the per-term breakdown filled in.
ad::Tensor total_loss(const ad::Tensor& mhat, const Raster& pan, const Raster& m,
                      const coreg::CoregistrationProduct& product,
                      const SensorSpec& spec, const LossConfig& cfg,
                      LossBreakdown& bd);

// Mean absolute difference between mtf_downscale(mhat) and m.
ad::Tensor l1_spectral_loss(const ad::Tensor& mhat, const Raster& m,
                            const SensorSpec& spec);

}  // namespace pansharp::loss
