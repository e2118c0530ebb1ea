#include "pansharp/raster.hpp"

#include <cmath>

#include "pansharp/errors.hpp"

namespace pansharp {

Raster Raster::make(i64 bands, i64 h, i64 w, double fill,
                    std::array<double, 2> range) {
  Raster r;
  r.bands = bands;
  r.height = h;
  r.width = w;
  r.values.assign(static_cast<size_t>(bands * h * w), fill);
  r.radiometric_range = range;
  return r;
}

ad::Tensor Raster::to_tensor() const {
  return ad::Tensor::from_data({1, bands, height, width}, values);
}

Raster Raster::from_tensor(const ad::Tensor& t, std::array<double, 2> range) {
  const ad::Shape s = t.shape();
  if (s.n != 1) throw ContractViolation("from_tensor: batch dim must be 1");
  Raster r;
  r.bands = s.c;
  r.height = s.h;
  r.width = s.w;
  r.values.assign(t.data().begin(), t.data().end());
  r.radiometric_range = range;
  return r;
}

void Raster::validate(const std::string& what) const {
  if (bands < 1 || height < 1 || width < 1)
    throw ContractViolation(what + ": empty raster");
  if (static_cast<i64>(values.size()) != bands * height * width)
    throw ContractViolation(what + ": value count does not match shape");
  for (double v : values)
    if (!std::isfinite(v)) throw LoadError(what + ": non-finite value");
  if (!(radiometric_range[1] > radiometric_range[0]))
    throw ContractViolation(what + ": degenerate radiometric range");
}

Mask Mask::full(i64 bands, i64 h, i64 w, bool value) {
  Mask m;
  m.bands = bands;
  m.height = h;
  m.width = w;
  m.valid.assign(static_cast<size_t>(bands * h * w), value ? 1 : 0);
  return m;
}

i64 Mask::count() const {
  i64 n = 0;
  for (auto v : valid) n += v != 0;
  return n;
}

Mask Mask::intersect(const Mask& other) const {
  if (bands != other.bands || height != other.height || width != other.width)
    throw ContractViolation("Mask::intersect: shape mismatch");
  Mask out = *this;
  for (size_t i = 0; i < valid.size(); ++i)
    out.valid[i] = (valid[i] && other.valid[i]) ? 1 : 0;
  return out;
}

double SensorSpec::ms_gain(i64 band) const {
  if (ms_mtf_gains.empty()) return 0.29;
  if (ms_mtf_gains.size() == 1) return ms_mtf_gains[0];
  if (band < 0 || band >= static_cast<i64>(ms_mtf_gains.size()))
    throw ContractViolation("SensorSpec: no MTF gain for band " +
                            std::to_string(band));
  return ms_mtf_gains[static_cast<size_t>(band)];
}

void SensorSpec::validate() const {
  if (ratio < 2) throw UnsupportedConfig("SensorSpec: ratio must be >= 2");
  auto check = [](double g) {
    if (!(g > 0.0 && g < 1.0))
      throw UnsupportedConfig("SensorSpec: MTF gains must lie in (0,1)");
  };
  for (double g : ms_mtf_gains) check(g);
  check(pan_mtf_gain);
}

}  // namespace pansharp
