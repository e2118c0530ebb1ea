#pragma once

#include <map>
#include <string>

#include "pansharp/adaptation.hpp"
#include "pansharp/loss.hpp"
#include "pansharp/metrics.hpp"
#include "pansharp/raster.hpp"

namespace pansharp::cli {

// Flat section.key -> string view of a config file; overrides apply on
// top in the order given.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_config_file(const std::string& path);

// Merged view of the library configs. Every key has a default; a file
// sets keys first, then dotted flag overrides win.
struct RunConfig {
  SensorSpec sensor;
  metrics::MetricConfig metric;
  loss::LossConfig loss;
  adapt::AdaptationConfig adapt;
  std::uint64_t seed = 0;
  int threads = 1;

  // Applies one "section.key" assignment; throws UnsupportedConfig for
  // unknown keys, ContractViolation for unparseable values.
  void set(const std::string& key, const std::string& value);

  // Re-derives the cross-references (adapt.sensor, adapt.loss,
  // metric.ratio) and validates everything.
  void finalize();

  std::string to_ini() const;

  static RunConfig build(const KeyValues& file_values, const KeyValues& overrides);
};

// Known keys with one-line help, for CLI registration.
struct ConfigKey {
  const char* key;
  const char* help;
};
const std::vector<ConfigKey>& config_keys();

}  // namespace pansharp::cli
