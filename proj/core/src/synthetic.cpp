#include "pansharp/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "pansharp/errors.hpp"
#include "pansharp/resample.hpp"

namespace pansharp {

namespace {

struct Sinusoid {
  double fx, fy, phase, amp;
};

std::vector<Sinusoid> draw_sinusoids(std::mt19937_64& rng, int count,
                                     double fmin, double fmax) {
  std::uniform_real_distribution<double> uang(0.0, 2.0 * M_PI);
  std::uniform_real_distribution<double> ufreq(fmin, fmax);
  std::uniform_real_distribution<double> uamp(0.4, 1.0);
  std::vector<Sinusoid> out;
  for (int i = 0; i < count; ++i) {
    const double theta = uang(rng), f = ufreq(rng);
    out.push_back({f * std::cos(theta), f * std::sin(theta), uang(rng), uamp(rng)});
  }
  return out;
}

void add_sinusoids(std::vector<double>& field, i64 e,
                   const std::vector<Sinusoid>& ss, double scale) {
  for (const auto& s : ss) {
    const double wx = 2.0 * M_PI * s.fx, wy = 2.0 * M_PI * s.fy;
    for (i64 y = 0; y < e; ++y) {
      const double py = wy * static_cast<double>(y) + s.phase;
      double* row = field.data() + y * e;
      for (i64 x = 0; x < e; ++x)
        row[x] += scale * s.amp * std::sin(wx * static_cast<double>(x) + py);
    }
  }
}

void normalize_std(std::vector<double>& field) {
  double mu = 0.0;
  for (double v : field) mu += v;
  mu /= static_cast<double>(field.size());
  double var = 0.0;
  for (double v : field) var += (v - mu) * (v - mu);
  var /= static_cast<double>(field.size());
  const double inv = var > 0.0 ? 1.0 / std::sqrt(var) : 0.0;
  for (double& v : field) v = (v - mu) * inv;
}

std::vector<double> gauss_taps(double sigma) {
  const i64 radius = static_cast<i64>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<size_t>(2 * radius + 1));
  double s = 0.0;
  for (i64 i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * i * i / (sigma * sigma));
    k[static_cast<size_t>(i + radius)] = v;
    s += v;
  }
  for (double& v : k) v /= s;
  return k;
}

// Separable blur with replicate borders, in place.
void blur(std::vector<double>& field, i64 e, double sigma) {
  const auto k = gauss_taps(sigma);
  const i64 r = static_cast<i64>(k.size()) / 2;
  std::vector<double> tmp(field.size());
  for (i64 y = 0; y < e; ++y)
    for (i64 x = 0; x < e; ++x) {
      double acc = 0.0;
      for (i64 t = -r; t <= r; ++t)
        acc += k[static_cast<size_t>(t + r)] *
               field[static_cast<size_t>(y * e + std::clamp<i64>(x + t, 0, e - 1))];
      tmp[static_cast<size_t>(y * e + x)] = acc;
    }
  for (i64 y = 0; y < e; ++y)
    for (i64 x = 0; x < e; ++x) {
      double acc = 0.0;
      for (i64 t = -r; t <= r; ++t)
        acc += k[static_cast<size_t>(t + r)] *
               tmp[static_cast<size_t>(std::clamp<i64>(y + t, 0, e - 1) * e + x)];
      field[static_cast<size_t>(y * e + x)] = acc;
    }
}

std::vector<double> noise_field(std::mt19937_64& rng, i64 e, double sigma) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> f(static_cast<size_t>(e * e));
  for (double& v : f) v = u(rng);
  if (sigma > 0.0) blur(f, e, sigma);
  normalize_std(f);
  return f;
}

}  // namespace

SyntheticScene make_synthetic_scene(
    std::uint64_t seed, i64 size, i64 bands, const SensorSpec& spec,
    const std::vector<std::array<double, 2>>& band_shifts) {
  spec.validate();
  const int R = spec.ratio;
  if (size < 4 * R || size % R != 0)
    throw ContractViolation("make_synthetic_scene: size must be >= 4R and divisible by R");
  if (bands < 1 || bands > 8)
    throw UnsupportedConfig("make_synthetic_scene: bands must be in [1,8]");
  if (!band_shifts.empty() && static_cast<i64>(band_shifts.size()) != bands)
    throw ContractViolation("make_synthetic_scene: band_shifts size mismatch");
  for (const auto& s : band_shifts)
    if (std::abs(s[0]) > 3.0 || std::abs(s[1]) > 3.0)
      throw ContractViolation("make_synthetic_scene: shifts limited to +-3");

  const i64 margin = 8;  // keeps +-3 shifts fully supported after cropping
  const i64 e = size + 2 * margin;
  std::mt19937_64 rng(seed);

  // Scalar parameters, drawn in one fixed block.
  const int kSites = 12;
  std::uniform_real_distribution<double> upos(0.0, static_cast<double>(e));
  std::vector<std::array<double, 2>> sites(kSites);
  for (auto& s : sites) {
    s[0] = upos(rng);
    s[1] = upos(rng);
  }
  std::uniform_real_distribution<double> ubase(400.0, 1600.0);
  std::uniform_real_distribution<double> uoff(-220.0, 220.0);
  std::vector<std::vector<double>> levels(kSites, std::vector<double>(bands));
  for (auto& site_levels : levels) {
    const double base = ubase(rng);
    for (double& l : site_levels) l = std::clamp(base + uoff(rng), 60.0, 1980.0);
  }
  auto shared_tex = draw_sinusoids(rng, 8, 0.02, 0.11);
  std::vector<std::vector<Sinusoid>> band_tex;
  for (i64 b = 0; b < bands; ++b) band_tex.push_back(draw_sinusoids(rng, 2, 0.03, 0.10));
  auto hf_tex = draw_sinusoids(rng, 3, 0.15, 0.35);       // above the MS Nyquist
  auto detail_tex = draw_sinusoids(rng, 4, 0.20, 0.45);   // PAN-only detail
  std::uniform_real_distribution<double> uw(0.5, 1.5);
  std::vector<double> weights(bands);
  double wsum = 0.0;
  for (double& w : weights) {
    w = uw(rng);
    wsum += w;
  }
  for (double& w : weights) w /= wsum;
  std::uniform_real_distribution<double> ualpha(70.0, 150.0);
  std::vector<double> alphas(bands);
  for (double& a : alphas) a = ualpha(rng);
  const double detail_amp = 25.0;

  // Shared fields.
  std::vector<double> tex(static_cast<size_t>(e * e), 0.0);
  add_sinusoids(tex, e, shared_tex, 1.0);
  normalize_std(tex);
  std::vector<double> hf(static_cast<size_t>(e * e), 0.0);
  add_sinusoids(hf, e, hf_tex, 1.0);
  normalize_std(hf);
  std::vector<double> smooth_noise = noise_field(rng, e, 1.5);

  // Nearest-site index per pixel.
  std::vector<int> region(static_cast<size_t>(e * e));
  for (i64 y = 0; y < e; ++y)
    for (i64 x = 0; x < e; ++x) {
      int best = 0;
      double bd = 1e300;
      for (int s = 0; s < kSites; ++s) {
        const double dx = x - sites[s][0], dy = y - sites[s][1];
        const double d = dx * dx + dy * dy;
        if (d < bd) {
          bd = d;
          best = s;
        }
      }
      region[static_cast<size_t>(y * e + x)] = best;
    }

  SyntheticScene scene;
  scene.truth = Raster::make(bands, size, size);
  scene.pan = Raster::make(1, size, size);
  Raster shifted_crop = Raster::make(bands, size, size);
  std::vector<double> pan_canvas(static_cast<size_t>(e * e), 0.0);

  Raster hr_band = Raster::make(1, e, e);
  for (i64 b = 0; b < bands; ++b) {
    std::vector<double> btex(static_cast<size_t>(e * e), 0.0);
    add_sinusoids(btex, e, band_tex[static_cast<size_t>(b)], 1.0);
    normalize_std(btex);
    std::vector<double> bnoise = noise_field(rng, e, 1.2);

    for (i64 i = 0; i < e * e; ++i) {
      const double base = levels[static_cast<size_t>(region[static_cast<size_t>(i)])]
                                [static_cast<size_t>(b)];
      const double v = base +
                       alphas[static_cast<size_t>(b)] *
                           (tex[static_cast<size_t>(i)] + 0.3 * btex[static_cast<size_t>(i)]) +
                       40.0 * hf[static_cast<size_t>(i)] +
                       30.0 * smooth_noise[static_cast<size_t>(i)] +
                       12.0 * bnoise[static_cast<size_t>(i)];
      hr_band.values[static_cast<size_t>(i)] = std::clamp(v, 30.0, 2020.0);
    }

    for (i64 i = 0; i < e * e; ++i)
      pan_canvas[static_cast<size_t>(i)] +=
          weights[static_cast<size_t>(b)] * hr_band.values[static_cast<size_t>(i)];

    for (i64 y = 0; y < size; ++y)
      for (i64 x = 0; x < size; ++x)
        scene.truth.at(b, y, x) = hr_band.at(0, y + margin, x + margin);

    const double sx = band_shifts.empty() ? 0.0 : band_shifts[static_cast<size_t>(b)][0];
    const double sy = band_shifts.empty() ? 0.0 : band_shifts[static_cast<size_t>(b)][1];
    auto [sh, mask] = shift_subpixel(hr_band, sx, sy);
    (void)mask;  // margin 8 > max shift support; the crop is fully valid
    for (i64 y = 0; y < size; ++y)
      for (i64 x = 0; x < size; ++x)
        shifted_crop.at(b, y, x) = sh.at(0, y + margin, x + margin);
  }

  std::vector<double> detail(static_cast<size_t>(e * e), 0.0);
  add_sinusoids(detail, e, detail_tex, 1.0);
  {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (double& v : detail) v += 0.5 * u(rng);
  }
  normalize_std(detail);
  for (i64 y = 0; y < size; ++y)
    for (i64 x = 0; x < size; ++x) {
      const size_t i = static_cast<size_t>((y + margin) * e + (x + margin));
      scene.pan.at(0, y, x) =
          std::clamp(pan_canvas[i] + detail_amp * detail[i], 30.0, 2020.0);
    }

  scene.ms = mtf_downscale(shifted_crop, spec);

  scene.record.seed = seed;
  scene.record.band_shifts =
      band_shifts.empty()
          ? std::vector<std::array<double, 2>>(static_cast<size_t>(bands), {0.0, 0.0})
          : band_shifts;
  scene.record.pan_weights = weights;
  scene.record.pan_detail_amplitude = detail_amp;
  return scene;
}

}  // namespace pansharp
