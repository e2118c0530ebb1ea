#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pansharp/tensor.hpp"

namespace pansharp {

using ad::i64;

// Dense multi-band image, band-sequential. PAN images use bands = 1.
struct Raster {
  i64 bands = 0;
  i64 height = 0;
  i64 width = 0;
  std::vector<double> values;
  std::array<double, 2> radiometric_range{0.0, 2047.0};

  double range_span() const { return radiometric_range[1] - radiometric_range[0]; }

  double& at(i64 b, i64 y, i64 x) {
    return values[static_cast<size_t>((b * height + y) * width + x)];
  }
  double at(i64 b, i64 y, i64 x) const {
    return values[static_cast<size_t>((b * height + y) * width + x)];
  }

  static Raster make(i64 bands, i64 h, i64 w, double fill = 0.0,
                     std::array<double, 2> range = {0.0, 2047.0});

  // (1, bands, height, width), untracked.
  ad::Tensor to_tensor() const;
  static Raster from_tensor(const ad::Tensor& t, std::array<double, 2> range);

  // Throws ContractViolation / LoadError for empty shape or non-finite values.
  void validate(const std::string& what) const;
};

// Per-(band, pixel) validity. Pixels invalidated by shifting or window
// support are excluded from every spatial average downstream.
struct Mask {
  i64 bands = 0;
  i64 height = 0;
  i64 width = 0;
  std::vector<std::uint8_t> valid;

  static Mask full(i64 bands, i64 h, i64 w, bool value = true);

  bool at(i64 b, i64 y, i64 x) const {
    return valid[static_cast<size_t>((b * height + y) * width + x)] != 0;
  }
  void set(i64 b, i64 y, i64 x, bool v) {
    valid[static_cast<size_t>((b * height + y) * width + x)] = v ? 1 : 0;
  }
  i64 count() const;
  Mask intersect(const Mask& other) const;
};

struct SensorSpec {
  std::string name = "generic";
  int ratio = 4;
  // Per-band MTF gain at Nyquist; empty means the 0.29 default for all
  // bands, a single entry broadcasts. These defaults are conventional
  // values, not measurements; override them in the sensor file.
  std::vector<double> ms_mtf_gains;
  double pan_mtf_gain = 0.15;

  double ms_gain(i64 band) const;
  void validate() const;  // ratio >= 2, gains in (0,1)
};

}  // namespace pansharp
