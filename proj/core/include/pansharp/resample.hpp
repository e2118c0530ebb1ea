#pragma once

#include <utility>
#include <vector>

#include "pansharp/raster.hpp"

namespace pansharp {

// Downscaling keeps samples at offset R/2 + i*R on both axes, which is
// where the cascaded upsampler lands the original samples, so M and
// M-hat-downscaled live on the same grid.
inline constexpr i64 decimation_offset(int R) { return R / 2; }

// One x2 stage of the 23-tap half-band interpolator, both axes.
// phase 1 places originals at odd output indices, phase 0 at even ones.
Raster upsample_halfband_x2(const Raster& in, int phase);

// x4 upsampling as two cascaded x2 stages (phase 1 then phase 0);
// originals are reproduced exactly at (4i+2, 4j+2). Only R = 4 is
// supported.
Raster upsample_poly23(const Raster& in, int R);

// Odd-length, unit-sum Gaussian taps whose frequency response at the
// decimated grid's Nyquist (period 2R samples) equals `gain`; truncated
// at 4 sigma.
std::vector<double> gaussian_mtf_kernel(double gain, int R);

// Separable Gaussian low-pass with replicate borders, differentiable.
// gains holds one MTF gain per channel of x.
ad::Tensor mtf_lowpass_t(const ad::Tensor& x, const std::vector<double>& gains,
                         int R);
// Low-pass then decimate by R at offset R/2 on both axes.
ad::Tensor mtf_downscale_t(const ad::Tensor& x, const std::vector<double>& gains,
                           int R);

// Raster wrappers over the tensor implementations (same numerics).
Raster lowpass_pan(const Raster& pan, const SensorSpec& spec);
Raster mtf_downscale(const Raster& x, const SensorSpec& spec);

// y(r, c) = x(r + dy, c + dx): integer part by indexing, fractional part
// bilinear. Pixels whose source samples fall outside the image are
// computed with clamped reads but marked invalid. |dx|, |dy| <= 3.
std::pair<Raster, Mask> shift_subpixel(const Raster& x, double dx, double dy);

// Per-band MTF gain vector for a raster under a sensor spec.
std::vector<double> ms_gains_for(i64 bands, const SensorSpec& spec);

}  // namespace pansharp
