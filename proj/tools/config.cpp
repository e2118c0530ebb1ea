#include "config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include "pansharp/errors.hpp"

namespace pansharp::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ContractViolation("config: " + key + ": expected a number, got '" + v + "'");
}

long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ContractViolation("config: " + key + ": expected an integer, got '" + v + "'");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ContractViolation("config: " + key + ": expected an unsigned integer, got '" +
                            v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ContractViolation("config: " + key + ": expected a boolean, got '" + v + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_double(key, item));
  }
  return out;
}

std::string join(const std::vector<double>& v) {
  std::ostringstream os;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) os << ", ";
    os << v[i];
  }
  return os.str();
}

}  // namespace

KeyValues parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("config: cannot open " + path);
  KeyValues kv;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw LoadError("config: " + path + ":" + std::to_string(lineno) +
                        ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos || section.empty())
      throw LoadError("config: " + path + ":" + std::to_string(lineno) +
                      ": expected 'key = value' inside a [section]");
    kv[section + "." + trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"sensor.name", "sensor label"},
      {"sensor.ratio", "PAN/MS resolution ratio"},
      {"sensor.ms_mtf_gains", "per-band MTF Nyquist gains, comma separated"},
      {"sensor.pan_mtf_gain", "PAN MTF Nyquist gain"},
      {"metrics.q_window", "UIQI/Q2n block size"},
      {"metrics.q_stride", "UIQI/Q2n block stride"},
      {"metrics.sigma", "local-correlation window"},
      {"metrics.eps", "variance floor"},
      {"loss.gamma", "ERGAS weight in the spectral term"},
      {"loss.beta", "spatial term weight"},
      {"loss.sigma", "correlation window of the spatial term"},
      {"loss.alignment", "shift bands by the estimated alignment"},
      {"loss.variant", "spectral term: khan_ergas or l1"},
      {"loss.eps", "variance floor"},
      {"adapt.lr", "optimizer step size"},
      {"adapt.beta1", "first-moment decay"},
      {"adapt.beta2", "second-moment decay"},
      {"adapt.eps", "optimizer epsilon"},
      {"adapt.iterations", "adaptation iterations"},
      {"adapt.tile", "tile size at PAN scale"},
      {"adapt.clusters", "tile clusters for fast adaptation"},
      {"adapt.fast", "adapt on selected tiles instead of the whole image"},
      {"adapt.descriptor", "tile descriptor variant"},
      {"run.seed", "seed for everything seeded"},
      {"run.threads", "upper bound on internal parallelism"},
  };
  return keys;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "sensor.name") sensor.name = value;
  else if (key == "sensor.ratio") sensor.ratio = static_cast<int>(parse_int(key, value));
  else if (key == "sensor.ms_mtf_gains") sensor.ms_mtf_gains = parse_list(key, value);
  else if (key == "sensor.pan_mtf_gain") sensor.pan_mtf_gain = parse_double(key, value);
  else if (key == "metrics.q_window") metric.q_window = parse_int(key, value);
  else if (key == "metrics.q_stride") metric.q_stride = parse_int(key, value);
  else if (key == "metrics.sigma") metric.sigma = parse_int(key, value);
  else if (key == "metrics.eps") metric.eps = parse_double(key, value);
  else if (key == "loss.gamma") loss.gamma = parse_double(key, value);
  else if (key == "loss.beta") loss.beta = parse_double(key, value);
  else if (key == "loss.sigma") loss.sigma = parse_int(key, value);
  else if (key == "loss.alignment") loss.alignment_enabled = parse_bool(key, value);
  else if (key == "loss.variant") {
    if (value == "khan_ergas") loss.variant = loss::SpectralVariant::KhanErgas;
    else if (value == "l1") loss.variant = loss::SpectralVariant::L1;
    else throw ContractViolation("config: loss.variant must be khan_ergas or l1, got '" +
                                 value + "'");
  } else if (key == "loss.eps") loss.eps = parse_double(key, value);
  else if (key == "adapt.lr") adapt.lr = parse_double(key, value);
  else if (key == "adapt.beta1") adapt.beta1 = parse_double(key, value);
  else if (key == "adapt.beta2") adapt.beta2 = parse_double(key, value);
  else if (key == "adapt.eps") adapt.adam_eps = parse_double(key, value);
  else if (key == "adapt.iterations") adapt.iterations = parse_int(key, value);
  else if (key == "adapt.tile") adapt.tile = parse_int(key, value);
  else if (key == "adapt.clusters") adapt.n_clusters = parse_int(key, value);
  else if (key == "adapt.fast") adapt.fast = parse_bool(key, value);
  else if (key == "adapt.descriptor") adapt.descriptor = value;
  else if (key == "run.seed") seed = parse_u64(key, value);
  else if (key == "run.threads") threads = static_cast<int>(parse_int(key, value));
  else throw UnsupportedConfig("config: unknown key '" + key + "'");
}

void RunConfig::finalize() {
  metric.ratio = sensor.ratio;
  adapt.seed = seed;
  adapt.sensor = sensor;
  adapt.loss = loss;
  if (threads < 1) throw ContractViolation("config: run.threads must be >= 1");
  sensor.validate();
  metric.validate();
  loss.validate();
  adapt.validate();
}

std::string RunConfig::to_ini() const {
  std::ostringstream os;
  os << "[sensor]\n";
  os << "name = " << sensor.name << "\n";
  os << "ratio = " << sensor.ratio << "\n";
  os << "ms_mtf_gains = " << join(sensor.ms_mtf_gains) << "\n";
  os << "pan_mtf_gain = " << sensor.pan_mtf_gain << "\n";
  os << "\n[metrics]\n";
  os << "q_window = " << metric.q_window << "\n";
  os << "q_stride = " << metric.q_stride << "\n";
  os << "sigma = " << metric.sigma << "\n";
  os << "eps = " << metric.eps << "\n";
  os << "\n[loss]\n";
  os << "gamma = " << loss.gamma << "\n";
  os << "beta = " << loss.beta << "\n";
  os << "sigma = " << loss.sigma << "\n";
  os << "alignment = " << (loss.alignment_enabled ? "true" : "false") << "\n";
  os << "variant = "
     << (loss.variant == loss::SpectralVariant::KhanErgas ? "khan_ergas" : "l1")
     << "\n";
  os << "eps = " << loss.eps << "\n";
  os << "\n[adapt]\n";
  os << "lr = " << adapt.lr << "\n";
  os << "beta1 = " << adapt.beta1 << "\n";
  os << "beta2 = " << adapt.beta2 << "\n";
  os << "eps = " << adapt.adam_eps << "\n";
  os << "iterations = " << adapt.iterations << "\n";
  os << "tile = " << adapt.tile << "\n";
  os << "clusters = " << adapt.n_clusters << "\n";
  os << "fast = " << (adapt.fast ? "true" : "false") << "\n";
  os << "descriptor = " << adapt.descriptor << "\n";
  os << "\n[run]\n";
  os << "seed = " << seed << "\n";
  os << "threads = " << threads << "\n";
  return os.str();
}

RunConfig RunConfig::build(const KeyValues& file_values, const KeyValues& overrides) {
  RunConfig cfg;
  for (const auto& [k, v] : file_values) cfg.set(k, v);
  for (const auto& [k, v] : overrides) cfg.set(k, v);
  cfg.finalize();
  return cfg;
}

}  // namespace pansharp::cli
