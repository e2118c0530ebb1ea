#include "pansharp/loss.hpp"

#include <cmath>
#include <string>

#include "pansharp/errors.hpp"
#include "pansharp/ops.hpp"
#include "pansharp/resample.hpp"

namespace pansharp::loss {

namespace {

using ad::Tensor;

void check_mhat_vs_ms(const ad::Shape& s, const Raster& m, int ratio,
                      const char* what) {
  if (s.n != 1)
    throw ContractViolation(std::string(what) + ": expected batch 1");
  if (s.c != m.bands || s.h != m.height * ratio || s.w != m.width * ratio)
    throw ContractViolation(std::string(what) + ": fused " + s.str() +
                            " inconsistent with reference " +
                            std::to_string(m.bands) + "x" +
                            std::to_string(m.height) + "x" +
                            std::to_string(m.width) + " at ratio " +
                            std::to_string(ratio));
}

Tensor shift_bands(const Tensor& mhat, const coreg::AlignmentVector& a) {
  const ad::Shape s = mhat.shape();
  if (static_cast<i64>(a.shifts.size()) != s.c)
    throw ContractViolation("spectral_loss: alignment vector has " +
                            std::to_string(a.shifts.size()) + " entries for " +
                            std::to_string(s.c) + " bands");
  a.validate();
  bool any = false;
  for (const auto& v : a.shifts) any = any || v[0] != 0.0 || v[1] != 0.0;
  if (!any) return mhat;

  std::vector<Tensor> bands;
  bands.reserve(static_cast<size_t>(s.c));
  for (i64 b = 0; b < s.c; ++b) {
    Tensor band = ad::crop(mhat, b, b + 1, 0, s.h, 0, s.w);
    const auto& v = a.shifts[static_cast<size_t>(b)];
    if (v[0] != 0.0 || v[1] != 0.0) band = ad::spatial_shift(band, v[0], v[1]);
    bands.push_back(band);
  }
  return s.c == 1 ? bands[0] : ad::concat_channels(bands);
}

void require_finite(const Tensor& t, const char* term) {
  if (!ad::all_finite(t))
    throw NumericFailure(std::string("loss: non-finite ") + term + " term");
}

}  // namespace

void LossConfig::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma))
    throw ContractViolation("LossConfig: gamma must be finite and >= 0");
  if (!(beta >= 0.0) || !std::isfinite(beta))
    throw ContractViolation("LossConfig: beta must be finite and >= 0");
  if (sigma < 2) throw ContractViolation("LossConfig: sigma must be >= 2");
  if (!(eps > 0.0)) throw ContractViolation("LossConfig: eps must be > 0");
}

ad::Tensor spectral_loss(const ad::Tensor& mhat, const Raster& m,
                         const coreg::AlignmentVector& a, const SensorSpec& spec,
                         const LossConfig& cfg, LossBreakdown* bd) {
  cfg.validate();
  spec.validate();
  m.validate("spectral_loss reference");
  const ad::Shape s = mhat.shape();
  check_mhat_vs_ms(s, m, spec.ratio, "spectral_loss");

  Tensor aligned = cfg.alignment_enabled ? shift_bands(mhat, a) : mhat;
  Tensor y_down =
      mtf_downscale_t(aligned, ms_gains_for(s.c, spec), spec.ratio);
  Tensor m_t = m.to_tensor();

  metrics::MetricConfig mcfg;
  mcfg.ratio = spec.ratio;
  mcfg.eps = cfg.eps;
  Tensor dl = metrics::d_lambda_khan_t(y_down, m_t, mcfg);
  require_finite(dl, "d_lambda");
  Tensor erg = metrics::ergas_t(y_down, m_t, spec.ratio);
  require_finite(erg, "ergas");

  if (bd) {
    bd->spectral_dlambda = dl.item();
    bd->spectral_ergas = erg.item();
  }
  return ad::add(dl, ad::scale(erg, cfg.gamma));
}

ad::Tensor spatial_loss(const ad::Tensor& mhat, const Raster& pan,
                        const metrics::CorrelationField& rho_max,
                        const LossConfig& cfg, double* fraction_active) {
  cfg.validate();
  pan.validate("spatial_loss pan");
  metrics::DRhoStats stats;
  Tensor l = metrics::d_rho_t(mhat, pan.to_tensor(), rho_max, cfg.sigma,
                              cfg.eps, &stats);
  require_finite(l, "spatial");
  if (fraction_active)
    *fraction_active = static_cast<double>(stats.active) /
                       static_cast<double>(stats.support);
  return l;
}

ad::Tensor total_loss(const ad::Tensor& mhat, const Raster& pan, const Raster& m,
                      const coreg::CoregistrationProduct& product,
                      const SensorSpec& spec, const LossConfig& cfg,
                      LossBreakdown& bd) {
  bd = LossBreakdown{};
  Tensor spectral;
  if (cfg.variant == SpectralVariant::L1) {
    spectral = l1_spectral_loss(mhat, m, spec);
    bd.spectral_dlambda = spectral.item();
  } else {
    spectral = spectral_loss(mhat, m, product.a, spec, cfg, &bd);
  }
  Tensor spatial =
      spatial_loss(mhat, pan, product.rho_max, cfg, &bd.fraction_active);
  bd.spatial = spatial.item();

  Tensor total = ad::add(spectral, ad::scale(spatial, cfg.beta));
  require_finite(total, "total");
  bd.total = total.item();
  return total;
}

ad::Tensor l1_spectral_loss(const ad::Tensor& mhat, const Raster& m,
                            const SensorSpec& spec) {
  spec.validate();
  m.validate("l1_spectral_loss reference");
  const ad::Shape s = mhat.shape();
  check_mhat_vs_ms(s, m, spec.ratio, "l1_spectral_loss");
  Tensor diff = ad::sub(mtf_downscale_t(mhat, ms_gains_for(s.c, spec), spec.ratio),
                        m.to_tensor());
  Tensor l = ad::mean(ad::add(ad::relu(diff), ad::relu(ad::neg(diff))));
  require_finite(l, "l1");
  return l;
}

}  // namespace pansharp::loss
