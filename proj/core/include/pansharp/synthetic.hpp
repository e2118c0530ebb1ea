#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "pansharp/raster.hpp"

namespace pansharp {

// Construction record of a generated scene; the generator doubles as
// the oracle for alignment and fusion tests.
struct SceneRecord {
  std::uint64_t seed = 0;
  // Shift applied (via shift_subpixel) to each HR band before MTF
  // downscaling produced M; the alignment search recovers exactly these.
  std::vector<std::array<double, 2>> band_shifts;
  std::vector<double> pan_weights;  // per band, sums to 1
  double pan_detail_amplitude = 0.0;
};

struct SyntheticScene {
  Raster truth;  // HR MS, PAN scale
  Raster pan;    // 1 band, PAN scale
  Raster ms;     // B bands, 1/R scale
  SceneRecord record;
};

// Structured scene: seeded Voronoi regions + band-correlated textures +
// smoothed noise. P is a fixed positive combination of the HR bands plus
// high-frequency detail absent from the MS. All fields are generated on
// an extended canvas so shifted bands keep full support (no invalid
// borders in the outputs). size must be divisible by spec.ratio.
SyntheticScene make_synthetic_scene(
    std::uint64_t seed, i64 size, i64 bands, const SensorSpec& spec,
    const std::vector<std::array<double, 2>>& band_shifts);

}  // namespace pansharp
