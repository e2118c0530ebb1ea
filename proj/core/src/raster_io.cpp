#include "pansharp/raster_io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>

#include <json.hpp>

#include "pansharp/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "raster payloads are little-endian; big-endian hosts unsupported");

namespace pansharp {

namespace {

using nlohmann::json;

std::string header_path(const std::string& path) {
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") return path;
  return path + ".json";
}

std::string payload_path(const std::string& path) {
  std::string h = header_path(path);
  return h.substr(0, h.size() - 5) + ".bin";
}

json parse_json_file(const std::string& path, const char* what) {
  std::ifstream f(path);
  if (!f) throw LoadError(std::string(what) + ": cannot open " + path);
  json j = json::parse(f, nullptr, false);
  if (j.is_discarded())
    throw LoadError(std::string(what) + ": malformed JSON in " + path);
  return j;
}

}  // namespace

Raster load_raster(const std::string& path) {
  const std::string hpath = header_path(path);
  json j = parse_json_file(hpath, "load_raster");

  Raster r;
  try {
    r.width = j.at("width").get<i64>();
    r.height = j.at("height").get<i64>();
    r.bands = j.at("bands").get<i64>();
    if (j.at("dtype").get<std::string>() != "f32le")
      throw LoadError("load_raster: unsupported dtype in " + hpath);
    if (j.at("layout").get<std::string>() != "band-sequential")
      throw LoadError("load_raster: unsupported layout in " + hpath);
    auto rr = j.at("radiometric_range");
    r.radiometric_range = {rr.at(0).get<double>(), rr.at(1).get<double>()};
  } catch (const json::exception& e) {
    throw LoadError("load_raster: bad header " + hpath + ": " + e.what());
  }
  if (r.width < 1 || r.height < 1 || r.bands < 1)
    throw LoadError("load_raster: non-positive dimensions in " + hpath);

  const std::string bpath = payload_path(path);
  std::ifstream f(bpath, std::ios::binary | std::ios::ate);
  if (!f) throw LoadError("load_raster: cannot open payload " + bpath);
  const auto bytes = static_cast<std::uint64_t>(f.tellg());
  const std::uint64_t expect =
      static_cast<std::uint64_t>(r.bands * r.height * r.width) * 4;
  if (bytes != expect)
    throw LoadError("load_raster: payload " + bpath + " holds " +
                    std::to_string(bytes) + " bytes, header implies " +
                    std::to_string(expect));
  f.seekg(0);
  std::vector<float> buf(static_cast<size_t>(r.bands * r.height * r.width));
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(expect));
  if (!f) throw LoadError("load_raster: short read from " + bpath);

  r.values.assign(buf.begin(), buf.end());
  for (double v : r.values)
    if (!std::isfinite(v))
      throw LoadError("load_raster: non-finite sample in " + bpath);
  return r;
}

void save_raster(const Raster& r, const std::string& path) {
  r.validate("save_raster");
  json j{{"width", r.width},
         {"height", r.height},
         {"bands", r.bands},
         {"dtype", "f32le"},
         {"layout", "band-sequential"},
         {"radiometric_range", {r.radiometric_range[0], r.radiometric_range[1]}}};
  const std::string hpath = header_path(path);
  std::ofstream hf(hpath);
  if (!hf) throw LoadError("save_raster: cannot write " + hpath);
  hf << j.dump(2) << "\n";

  std::vector<float> buf(r.values.begin(), r.values.end());
  const std::string bpath = payload_path(path);
  std::ofstream bf(bpath, std::ios::binary);
  if (!bf) throw LoadError("save_raster: cannot write " + bpath);
  bf.write(reinterpret_cast<const char*>(buf.data()),
           static_cast<std::streamsize>(buf.size() * 4));
  if (!bf) throw LoadError("save_raster: short write to " + bpath);
}

Raster load_pgm16(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw LoadError("load_pgm16: cannot open " + path);

  auto next_token = [&]() -> std::string {
    std::string tok;
    int ch;
    while ((ch = f.get()) != EOF) {
      if (ch == '#') {  // comment to end of line
        while ((ch = f.get()) != EOF && ch != '\n') {
        }
        continue;
      }
      if (std::isspace(ch)) {
        if (!tok.empty()) return tok;
        continue;
      }
      tok.push_back(static_cast<char>(ch));
    }
    return tok;
  };

  if (next_token() != "P5") throw LoadError("load_pgm16: not a P5 PGM: " + path);
  i64 w, h, maxval;
  try {
    w = std::stoll(next_token());
    h = std::stoll(next_token());
    maxval = std::stoll(next_token());
  } catch (const std::exception&) {
    throw LoadError("load_pgm16: malformed header in " + path);
  }
  if (w < 1 || h < 1) throw LoadError("load_pgm16: bad dimensions in " + path);
  if (maxval <= 255 || maxval > 65535)
    throw LoadError("load_pgm16: expected 16-bit maxval in " + path);

  std::vector<std::uint8_t> buf(static_cast<size_t>(w * h * 2));
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!f) throw LoadError("load_pgm16: truncated payload in " + path);

  Raster r = Raster::make(1, h, w, 0.0, {0.0, static_cast<double>(maxval)});
  for (i64 i = 0; i < w * h; ++i) {
    const size_t o = static_cast<size_t>(2 * i);
    const std::uint16_t v =
        static_cast<std::uint16_t>((buf[o] << 8) | buf[o + 1]);  // big-endian
    if (v > maxval)
      throw LoadError("load_pgm16: sample exceeds maxval in " + path);
    r.values[static_cast<size_t>(i)] = static_cast<double>(v);
  }
  return r;
}

SensorSpec load_sensor_spec(const std::string& path) {
  json j = parse_json_file(path, "load_sensor_spec");
  SensorSpec s;
  try {
    s.name = j.value("name", std::string("generic"));
    s.ratio = j.at("ratio").get<int>();
    s.ms_mtf_gains = j.value("ms_mtf_gains", std::vector<double>{});
    s.pan_mtf_gain = j.value("pan_mtf_gain", 0.15);
  } catch (const json::exception& e) {
    throw LoadError("load_sensor_spec: bad file " + path + ": " + e.what());
  }
  try {
    s.validate();
  } catch (const Error& e) {
    throw LoadError("load_sensor_spec: " + path + ": " + e.what());
  }
  return s;
}

void save_sensor_spec(const SensorSpec& spec, const std::string& path) {
  json j{{"name", spec.name},
         {"ratio", spec.ratio},
         {"ms_mtf_gains", spec.ms_mtf_gains},
         {"pan_mtf_gain", spec.pan_mtf_gain}};
  std::ofstream f(path);
  if (!f) throw LoadError("save_sensor_spec: cannot write " + path);
  f << j.dump(2) << "\n";
}

}  // namespace pansharp
