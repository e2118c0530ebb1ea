#include "pansharp/resample.hpp"

#include <algorithm>
#include <cmath>

#include "pansharp/ops.hpp"

namespace pansharp {

namespace {

// Published 23-tap half-band design: center tap 1, zeros at even lags.
// The odd taps are rescaled by a hair (4e-10) so each side sums to 0.5
// exactly and constants are preserved bit-for-bit.
constexpr int kHalfBandRadius = 11;

const std::vector<double>& halfband_odd_taps() {
  static const std::vector<double> taps = [] {
    std::vector<double> t = {0.61066818237,  -0.145397186478, 0.043619155884,
                             -0.010385513306, 0.001615524292, -0.000120162964};
    double s = 0.0;
    for (double v : t) s += v;
    for (double& v : t) v *= 0.5 / s;
    return t;
  }();
  return taps;
}

// One axis of a half-band x2 stage over a line of length n.
// out has length 2n; out(2i+phase) = in(i); the other parity is the
// odd-tap sum with clamped source indices.
void upsample_line_x2(const double* in, i64 n, i64 stride_in, double* out,
                      i64 stride_out, int phase) {
  const auto& taps = halfband_odd_taps();
  auto src = [&](i64 i) { return in[std::clamp<i64>(i, 0, n - 1) * stride_in]; };
  for (i64 i = 0; i < n; ++i) out[(2 * i + phase) * stride_out] = in[i * stride_in];
  // Output j of the other parity sees originals at j +- odd lags; the
  // original at output index 2k+phase is source sample k. j - lag - phase
  // is always even, so the divisions are exact.
  for (i64 i = 0; i < n; ++i) {
    const i64 j = 2 * i + 1 - phase;
    double acc = 0.0;
    for (size_t t = 0; t < taps.size(); ++t) {
      const i64 lag = 2 * static_cast<i64>(t) + 1;
      acc += taps[t] * (src((j - lag - phase) / 2) + src((j + lag - phase) / 2));
    }
    out[j * stride_out] = acc;
  }
}

}  // namespace

Raster upsample_halfband_x2(const Raster& in, int phase) {
  if (phase != 0 && phase != 1)
    throw ContractViolation("upsample_halfband_x2: phase must be 0 or 1");
  in.validate("upsample_halfband_x2 input");
  const i64 h = in.height, w = in.width;
  Raster mid = Raster::make(in.bands, h, 2 * w, 0.0, in.radiometric_range);
  for (i64 b = 0; b < in.bands; ++b)
    for (i64 y = 0; y < h; ++y)
      upsample_line_x2(in.values.data() + (b * h + y) * w, w, 1,
                       mid.values.data() + (b * h + y) * 2 * w, 1, phase);
  Raster out = Raster::make(in.bands, 2 * h, 2 * w, 0.0, in.radiometric_range);
  for (i64 b = 0; b < in.bands; ++b)
    for (i64 x = 0; x < 2 * w; ++x)
      upsample_line_x2(mid.values.data() + b * h * 2 * w + x, h, 2 * w,
                       out.values.data() + b * 2 * h * 2 * w + x, 2 * w, phase);
  return out;
}

Raster upsample_poly23(const Raster& in, int R) {
  if (R != 4)
    throw UnsupportedConfig("upsample_poly23: only ratio 4 is supported, got " +
                            std::to_string(R));
  return upsample_halfband_x2(upsample_halfband_x2(in, 1), 0);
}

std::vector<double> gaussian_mtf_kernel(double gain, int R) {
  if (!(gain > 0.0 && gain < 1.0))
    throw ContractViolation("gaussian_mtf_kernel: gain must be in (0,1)");
  if (R < 2) throw ContractViolation("gaussian_mtf_kernel: R must be >= 2");
  const double sigma = (R / M_PI) * std::sqrt(-2.0 * std::log(gain));
  const i64 radius = static_cast<i64>(std::ceil(4.0 * sigma));
  std::vector<double> k(static_cast<size_t>(2 * radius + 1));
  double s = 0.0;
  for (i64 i = -radius; i <= radius; ++i) {
    double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[static_cast<size_t>(i + radius)] = v;
    s += v;
  }
  for (double& v : k) v /= s;
  return k;
}

ad::Tensor mtf_lowpass_t(const ad::Tensor& x, const std::vector<double>& gains,
                         int R) {
  const ad::Shape s = x.shape();
  if (static_cast<i64>(gains.size()) != s.c)
    throw ContractViolation("mtf_lowpass_t: need one gain per channel");
  std::vector<ad::Tensor> bands;
  bands.reserve(static_cast<size_t>(s.c));
  for (i64 c = 0; c < s.c; ++c) {
    const auto k = gaussian_mtf_kernel(gains[static_cast<size_t>(c)], R);
    const i64 klen = static_cast<i64>(k.size());
    ad::Tensor kv = ad::Tensor::from_data({1, 1, klen, 1}, k);
    ad::Tensor kh = ad::Tensor::from_data({1, 1, 1, klen}, k);
    ad::Tensor band = ad::crop(x, c, c + 1, 0, s.h, 0, s.w);
    band = ad::conv2d(band, kv, ad::Padding::Replicate);
    band = ad::conv2d(band, kh, ad::Padding::Replicate);
    bands.push_back(band);
  }
  return s.c == 1 ? bands[0] : ad::concat_channels(bands);
}

ad::Tensor mtf_downscale_t(const ad::Tensor& x, const std::vector<double>& gains,
                           int R) {
  const ad::Shape s = x.shape();
  if (s.h % R != 0 || s.w % R != 0)
    throw ContractViolation("mtf_downscale: dimensions " + s.str() +
                            " not divisible by ratio " + std::to_string(R));
  const i64 off = decimation_offset(R);
  return ad::subsample(mtf_lowpass_t(x, gains, R), R, off, off);
}

Raster lowpass_pan(const Raster& pan, const SensorSpec& spec) {
  pan.validate("lowpass_pan input");
  if (pan.bands != 1) throw ContractViolation("lowpass_pan: PAN must have 1 band");
  ad::Tensor t = mtf_lowpass_t(pan.to_tensor(), {spec.pan_mtf_gain}, spec.ratio);
  return Raster::from_tensor(t, pan.radiometric_range);
}

Raster mtf_downscale(const Raster& x, const SensorSpec& spec) {
  x.validate("mtf_downscale input");
  ad::Tensor t =
      mtf_downscale_t(x.to_tensor(), ms_gains_for(x.bands, spec), spec.ratio);
  return Raster::from_tensor(t, x.radiometric_range);
}

std::pair<Raster, Mask> shift_subpixel(const Raster& x, double dx, double dy) {
  if (std::abs(dx) > 3.0 || std::abs(dy) > 3.0)
    throw ContractViolation("shift_subpixel: offset beyond the +-3 search extent");
  x.validate("shift_subpixel input");
  const i64 h = x.height, w = x.width;
  Raster out = Raster::make(x.bands, h, w, 0.0, x.radiometric_range);
  Mask mask = Mask::full(x.bands, h, w);

  const double fy = std::floor(dy), fx = std::floor(dx);
  const i64 iy = static_cast<i64>(fy), ix = static_cast<i64>(fx);
  const double ry = dy - fy, rx = dx - fx;
  const double w00 = (1.0 - ry) * (1.0 - rx), w01 = (1.0 - ry) * rx;
  const double w10 = ry * (1.0 - rx), w11 = ry * rx;
  auto cy = [&](i64 y) { return std::clamp<i64>(y, 0, h - 1); };
  auto cx = [&](i64 xq) { return std::clamp<i64>(xq, 0, w - 1); };

  for (i64 b = 0; b < x.bands; ++b)
    for (i64 y = 0; y < h; ++y) {
      const i64 y0 = y + iy;
      const bool yok = ry == 0.0 ? (y0 >= 0 && y0 <= h - 1)
                                 : (y0 >= 0 && y0 + 1 <= h - 1);
      const i64 ya = cy(y0), yb = cy(y0 + 1);
      for (i64 xq = 0; xq < w; ++xq) {
        const i64 x0 = xq + ix;
        const bool xok = rx == 0.0 ? (x0 >= 0 && x0 <= w - 1)
                                   : (x0 >= 0 && x0 + 1 <= w - 1);
        const i64 xa = cx(x0), xb = cx(x0 + 1);
        out.at(b, y, xq) = w00 * x.at(b, ya, xa) + w01 * x.at(b, ya, xb) +
                           w10 * x.at(b, yb, xa) + w11 * x.at(b, yb, xb);
        if (!(yok && xok)) mask.set(b, y, xq, false);
      }
    }
  return {std::move(out), std::move(mask)};
}

std::vector<double> ms_gains_for(i64 bands, const SensorSpec& spec) {
  std::vector<double> g(static_cast<size_t>(bands));
  for (i64 b = 0; b < bands; ++b) g[static_cast<size_t>(b)] = spec.ms_gain(b);
  return g;
}

}  // namespace pansharp
