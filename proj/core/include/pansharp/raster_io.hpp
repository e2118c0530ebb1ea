#pragma once

#include <string>

#include "pansharp/raster.hpp"

namespace pansharp {

// Rasters live as a pair of files: <stem>.json header and <stem>.bin
// payload (float32, little-endian, band-sequential). `path` may be the
// header path or the bare stem.

Raster load_raster(const std::string& path);
void save_raster(const Raster& r, const std::string& path);

// 16-bit binary PGM (P5, maxval > 255), for PAN import.
Raster load_pgm16(const std::string& path);

SensorSpec load_sensor_spec(const std::string& path);
void save_sensor_spec(const SensorSpec& spec, const std::string& path);

}  // namespace pansharp
