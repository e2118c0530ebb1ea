#include "pansharp/coregistration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pansharp/errors.hpp"
#include "pansharp/ops.hpp"
#include "pansharp/resample.hpp"

namespace pansharp::coreg {

using ad::Tensor;

void AlignmentVector::validate() const {
  for (size_t b = 0; b < shifts.size(); ++b)
    for (double v : shifts[b]) {
      if (std::abs(v) > kGridMax + 1e-12)
        throw ContractViolation("AlignmentVector: band " + std::to_string(b) +
                                " shift outside +-3");
      const double steps = v / kGridSpacing;
      if (steps != std::round(steps))
        throw ContractViolation("AlignmentVector: band " + std::to_string(b) +
                                " shift off the half-pixel grid");
    }
}

namespace {

void check_inputs(const Raster& pan, const Raster& ms, const SensorSpec& spec) {
  pan.validate("coregistration: pan");
  ms.validate("coregistration: ms");
  spec.validate();
  if (pan.bands != 1)
    throw ContractViolation("coregistration: pan must have 1 band");
  const i64 r = spec.ratio;
  if (ms.height * r != pan.height || ms.width * r != pan.width)
    throw ContractViolation("coregistration: MS size times ratio must match PAN");
}

// Constant per-channel offset for moment conditioning; correlation is
// shift-invariant so scores are unaffected.
Tensor centered(const Tensor& x) {
  const auto& s = x.shape();
  const i64 plane = s.h * s.w;
  std::vector<double> means(static_cast<size_t>(s.n * s.c), 0.0);
  const double* d = x.data().data();
  for (i64 nc = 0; nc < s.n * s.c; ++nc) {
    double acc = 0.0;
    for (i64 i = 0; i < plane; ++i) acc += d[nc * plane + i];
    means[static_cast<size_t>(nc)] = acc / static_cast<double>(plane);
  }
  return ad::sub(x, Tensor::from_data({s.n, s.c, 1, 1}, means));
}

Tensor not_less(const Tensor& a, double threshold) {
  return ad::sub(Tensor::scalar(1.0), ad::less_mask(a, Tensor::scalar(threshold)));
}

double grid_offset(int i) { return -kGridMax + kGridSpacing * i; }

struct Candidate {
  double dx = 0.0, dy = 0.0;
};

bool better(double score, const Candidate& c, double best_score,
            const Candidate& best) {
  if (score != best_score) return score > best_score;
  const double n = c.dx * c.dx + c.dy * c.dy;
  const double bn = best.dx * best.dx + best.dy * best.dy;
  if (n != bn) return n < bn;
  if (c.dx != best.dx) return c.dx < best.dx;
  return c.dy < best.dy;
}

// Bounding box of the (rectangular) valid region of a 1-band mask.
struct Box {
  i64 y0 = 0, y1 = -1, x0 = 0, x1 = -1;  // inclusive
};

Box mask_box(const Mask& m) {
  Box b;
  b.y0 = m.height;
  b.x0 = m.width;
  for (i64 y = 0; y < m.height; ++y)
    for (i64 x = 0; x < m.width; ++x)
      if (m.at(0, y, x)) {
        b.y0 = std::min(b.y0, y);
        b.y1 = std::max(b.y1, y);
        b.x0 = std::min(b.x0, x);
        b.x1 = std::max(b.x1, x);
      }
  return b;
}

}  // namespace

metrics::CorrelationField reference_correlation_field(const Raster& pan,
                                                      const Raster& ms,
                                                      const SensorSpec& spec) {
  check_inputs(pan, ms, spec);
  const Raster mt = upsample_poly23(ms, spec.ratio);
  const Raster plp = lowpass_pan(pan, spec);
  const i64 sigma = static_cast<i64>(spec.ratio) * spec.ratio;
  return metrics::local_correlation_field(plp, mt, sigma);
}

CoregistrationProduct estimate_band_shifts(const Raster& pan, const Raster& ms,
                                           const SensorSpec& spec,
                                           const SearchConfig& cfg) {
  check_inputs(pan, ms, spec);
  const i64 sigma = static_cast<i64>(spec.ratio) * spec.ratio;
  const i64 h = pan.height, w = pan.width;
  const i64 bands = ms.bands;

  const i64 ah = h - sigma + 1, aw = w - sigma + 1;
  const i64 a_lo = kSearchMargin;
  const i64 ay_hi = h - sigma - kSearchMargin;  // inclusive anchor bounds
  const i64 ax_hi = w - sigma - kSearchMargin;
  if (ay_hi < a_lo || ax_hi < a_lo)
    throw InsufficientSupport(
        "estimate_band_shifts: image too small for the window-" +
        std::to_string(sigma) + " search");

  const Raster mt = upsample_poly23(ms, spec.ratio);
  const Raster plp = lowpass_pan(pan, spec);

  const Tensor pc = centered(plp.to_tensor());
  const Tensor mc = centered(mt.to_tensor());

  // Band moments are shift-independent: compute once.
  const Tensor mm = ad::windowed_mean(mc, sigma, 1);
  const Tensor mvar =
      ad::sub(ad::windowed_mean(ad::square(mc), sigma, 1), ad::square(mm));

  std::vector<double> margin(static_cast<size_t>(ah * aw), 0.0);
  for (i64 y = a_lo; y <= ay_hi; ++y)
    for (i64 x = a_lo; x <= ax_hi; ++x)
      margin[static_cast<size_t>(y * aw + x)] = 1.0;
  const Tensor margin_t = Tensor::from_data({1, 1, ah, aw}, std::move(margin));
  const Tensor base_valid = ad::mul(not_less(mvar, cfg.eps), margin_t);

  const int n_cand = kGridSteps * kGridSteps;
  std::vector<std::vector<double>> score(
      static_cast<size_t>(n_cand),
      std::vector<double>(static_cast<size_t>(bands),
                          -std::numeric_limits<double>::infinity()));
  std::vector<Candidate> cand(static_cast<size_t>(n_cand));

  const i64 aplane = ah * aw;
  for (int cy = 0; cy < kGridSteps; ++cy)
    for (int cx = 0; cx < kGridSteps; ++cx) {
      const int ci = cy * kGridSteps + cx;
      cand[static_cast<size_t>(ci)] = {grid_offset(cx), grid_offset(cy)};
      const Tensor ps = ad::spatial_shift(pc, cand[static_cast<size_t>(ci)].dx,
                                          cand[static_cast<size_t>(ci)].dy);
      const Tensor mp = ad::windowed_mean(ps, sigma, 1);
      const Tensor pvar =
          ad::sub(ad::windowed_mean(ad::square(ps), sigma, 1), ad::square(mp));
      const Tensor cov =
          ad::sub(ad::windowed_mean(ad::mul(ps, mc), sigma, 1), ad::mul(mp, mm));
      const Tensor denom = ad::clamp_min(
          ad::sqrt_(ad::clamp_min(ad::mul(pvar, mvar), 0.0)), cfg.eps);
      const Tensor corr = ad::clamp(ad::div(cov, denom), -1.0, 1.0);
      const Tensor joint = ad::mul(base_valid, not_less(pvar, cfg.eps));

      const double* cr = corr.data().data();
      const double* jt = joint.data().data();
      for (i64 b = 0; b < bands; ++b) {
        double num = 0.0, den = 0.0;
        for (i64 i = 0; i < aplane; ++i) {
          num += cr[b * aplane + i] * jt[b * aplane + i];
          den += jt[b * aplane + i];
        }
        if (den > 0.0) score[static_cast<size_t>(ci)][static_cast<size_t>(b)] = num / den;
      }
    }

  CoregistrationProduct out;
  out.a.shifts.resize(static_cast<size_t>(bands));
  out.scores.resize(static_cast<size_t>(bands));
  out.zero_scores.resize(static_cast<size_t>(bands));
  const int zero_ci = (kGridSteps / 2) * kGridSteps + kGridSteps / 2;
  for (i64 b = 0; b < bands; ++b) {
    double best = -std::numeric_limits<double>::infinity();
    Candidate best_c;
    bool found = false;
    for (int ci = 0; ci < n_cand; ++ci) {
      const double s = score[static_cast<size_t>(ci)][static_cast<size_t>(b)];
      if (!std::isfinite(s)) continue;
      if (!found || better(s, cand[static_cast<size_t>(ci)], best, best_c)) {
        found = true;
        best = s;
        best_c = cand[static_cast<size_t>(ci)];
      }
    }
    if (!found)
      throw InsufficientSupport("estimate_band_shifts: band " +
                                std::to_string(b) +
                                " has no scorable windows (flat or too small)");
    out.a.shifts[static_cast<size_t>(b)] = {best_c.dx, best_c.dy};
    out.scores[static_cast<size_t>(b)] = best;
    out.zero_scores[static_cast<size_t>(b)] =
        score[static_cast<size_t>(zero_ci)][static_cast<size_t>(b)];
  }
  out.a.validate();

  if (cfg.rho_max_at_zero_shift) {
    out.rho_max = metrics::local_correlation_field(plp, mt, sigma, cfg.eps);
    return out;
  }

  // Field at the optimal shifts: band b correlates shift(P^lp, a_b) with
  // the upsampled band; windows touching shift-invalid pixels are masked.
  metrics::CorrelationField f;
  f.bands = bands;
  f.height = h;
  f.width = w;
  f.window = sigma;
  f.values.assign(static_cast<size_t>(bands * h * w), 0.0);
  f.mask = Mask::full(bands, h, w, false);
  const i64 off = sigma / 2;
  const Tensor mt_t = mt.to_tensor();
  for (i64 b = 0; b < bands; ++b) {
    const auto [shifted, smask] =
        shift_subpixel(plp, out.a.shifts[static_cast<size_t>(b)][0],
                       out.a.shifts[static_cast<size_t>(b)][1]);
    const Box box = mask_box(smask);
    const Tensor mtb = ad::crop(mt_t, b, b + 1, 0, h, 0, w);
    const metrics::LocalCorr lc =
        metrics::local_corr_anchor(shifted.to_tensor(), mtb, sigma, cfg.eps);
    const double* rho = lc.rho.data().data();
    const double* val = lc.valid.data().data();
    for (i64 y = 0; y + sigma <= h; ++y)
      for (i64 x = 0; x + sigma <= w; ++x) {
        const bool inside = y >= box.y0 && y + sigma - 1 <= box.y1 &&
                            x >= box.x0 && x + sigma - 1 <= box.x1;
        const size_t src = static_cast<size_t>(y * aw + x);
        if (!inside || val[src] <= 0.5) continue;
        const size_t dst =
            static_cast<size_t>((b * h + y + off) * w + x + off);
        f.values[dst] = rho[src];
        f.mask.valid[dst] = 1;
      }
  }
  out.rho_max = std::move(f);
  return out;
}

}  // namespace pansharp::coreg
