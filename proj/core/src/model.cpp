#include "pansharp/model.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "pansharp/errors.hpp"
#include "pansharp/ops.hpp"

namespace pansharp::model {

namespace {

constexpr i64 kChannels = 64;
constexpr i64 kReduction = 16;
constexpr i64 kSqueezed = kChannels / kReduction;

// Box-Muller over raw 53-bit uniforms; std::normal_distribution's
// sequence is implementation-defined and would break seed portability.
class Gauss {
 public:
  explicit Gauss(std::uint64_t seed) : rng_(seed) {}

  double next() {
    if (have_) {
      have_ = false;
      return spare_;
    }
    const double u1 = ((rng_() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = (rng_() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    have_ = true;
    spare_ = r * std::sin(2.0 * M_PI * u2);
    return r * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::mt19937_64 rng_;
  bool have_ = false;
  double spare_ = 0.0;
};

std::vector<ParamSpec> make_layout(i64 bands) {
  std::vector<ParamSpec> specs;
  auto conv = [&](const std::string& name, i64 cout, i64 cin, i64 k) {
    specs.push_back({name + ".w", {cout, cin, k, k}});
    specs.push_back({name + ".b", {1, cout, 1, 1}});
  };
  auto attention = [&](const std::string& name) {
    conv(name + ".squeeze", kSqueezed, kChannels, 1);
    conv(name + ".excite", kChannels, kSqueezed, 1);
    conv(name + ".spatial", 1, 2, 7);
  };
  conv("head1", kChannels, bands + 1, 3);
  conv("head2", kChannels, kChannels, 3);
  attention("att1");
  conv("res1.a", kChannels, kChannels, 3);
  conv("res1.b", kChannels, kChannels, 3);
  attention("att2");
  conv("res2.a", kChannels, kChannels, 3);
  conv("res2.b", kChannels, kChannels, 3);
  conv("out", bands, kChannels, 3);
  return specs;
}

void check_weights(const ModelWeights& w, const char* what) {
  if (w.bands < 1 || w.bands > 8)
    throw ContractViolation(std::string(what) + ": bands must be in [1,8]");
  const auto& specs = layout(w.bands);
  if (w.params.size() != specs.size())
    throw ContractViolation(std::string(what) + ": expected " +
                            std::to_string(specs.size()) + " parameter tensors, got " +
                            std::to_string(w.params.size()));
  for (size_t i = 0; i < specs.size(); ++i) {
    const ad::Shape got = w.params[i].shape(), want = specs[i].shape;
    if (got.n != want.n || got.c != want.c || got.h != want.h || got.w != want.w)
      throw ContractViolation(std::string(what) + ": parameter " + specs[i].name +
                              " has shape " + got.str() + ", expected " +
                              want.str());
  }
}

ad::Tensor conv_bias(const ad::Tensor& x, const ad::Tensor& w,
                     const ad::Tensor& b) {
  return ad::add(ad::conv2d(x, w, ad::Padding::Replicate), b);
}

}  // namespace

const std::vector<ParamSpec>& layout(i64 bands) {
  if (bands < 1 || bands > 8)
    throw ContractViolation("layout: bands must be in [1,8]");
  static const std::array<std::vector<ParamSpec>, 9> cache = [] {
    std::array<std::vector<ParamSpec>, 9> c;
    for (i64 b = 1; b <= 8; ++b) c[static_cast<size_t>(b)] = make_layout(b);
    return c;
  }();
  return cache[static_cast<size_t>(bands)];
}

i64 parameter_count_for(i64 bands) {
  i64 total = 0;
  for (const auto& s : layout(bands)) total += s.shape.numel();
  return total;
}

ModelWeights ModelWeights::leafed(ad::Tape& tape) const {
  ModelWeights out;
  out.bands = bands;
  out.seed = seed;
  out.params.reserve(params.size());
  for (const auto& p : params) out.params.push_back(tape.leaf(p));
  return out;
}

i64 ModelWeights::parameter_count() const {
  i64 total = 0;
  for (const auto& p : params) total += p.shape().numel();
  return total;
}

ModelWeights init_model(i64 bands, std::uint64_t seed) {
  const auto& specs = layout(bands);
  Gauss gauss(seed);
  ModelWeights w;
  w.bands = bands;
  w.seed = seed;
  w.params.reserve(specs.size());
  for (const auto& s : specs) {
    std::vector<double> data(static_cast<size_t>(s.shape.numel()), 0.0);
    if (s.name.ends_with(".w")) {
      const double fan_in =
          static_cast<double>(s.shape.c * s.shape.h * s.shape.w);
      double std_dev = std::sqrt(2.0 / fan_in);
      // Residual stacking leaves rms ~3.5 activations at the output
      // conv; 0.005 keeps the fresh forward within 5% of the skip path.
      if (s.name == "out.w") std_dev *= 0.005;
      for (double& v : data) v = std_dev * gauss.next();
    }
    w.params.push_back(ad::Tensor::from_data(s.shape, std::move(data)));
  }
  return w;
}

ad::Tensor resblock_t(const ad::Tensor& x, const ad::Tensor& w1,
                      const ad::Tensor& b1, const ad::Tensor& w2,
                      const ad::Tensor& b2) {
  return ad::add(x, conv_bias(ad::gelu(conv_bias(x, w1, b1)), w2, b2));
}

ad::Tensor rcbam_t(const ad::Tensor& x, const ad::Tensor& sq_w,
                   const ad::Tensor& sq_b, const ad::Tensor& ex_w,
                   const ad::Tensor& ex_b, const ad::Tensor& sp_w,
                   const ad::Tensor& sp_b) {
  auto perceptron = [&](const ad::Tensor& pooled) {
    return conv_bias(ad::relu(conv_bias(pooled, sq_w, sq_b)), ex_w, ex_b);
  };
  ad::Tensor logits = ad::add(perceptron(ad::global_max_pool(x)),
                              perceptron(ad::global_avg_pool(x)));
  ad::Tensor channel_gated = ad::mul(x, ad::sigmoid(logits));

  ad::Tensor stats = ad::concat_channels(
      {ad::channel_max(channel_gated), ad::channel_avg(channel_gated)});
  ad::Tensor map = ad::sigmoid(conv_bias(stats, sp_w, sp_b));
  return ad::add(x, ad::mul(channel_gated, map));
}

ad::Tensor forward_t(const ModelWeights& w, const ad::Tensor& pan,
                     const ad::Tensor& mtilde, double range) {
  check_weights(w, "forward");
  const ad::Shape ps = pan.shape(), ms = mtilde.shape();
  if (ps.n != 1 || ps.c != 1 || ms.n != 1)
    throw ContractViolation("forward: expected pan (1,1,H,W), mtilde (1,B,H,W)");
  if (ms.c != w.bands)
    throw ContractViolation("forward: mtilde has " + std::to_string(ms.c) +
                            " bands, weights expect " + std::to_string(w.bands));
  if (ps.h != ms.h || ps.w != ms.w)
    throw ContractViolation("forward: pan and mtilde sizes differ");
  if (!(range > 0.0) || !std::isfinite(range))
    throw ContractViolation("forward: range must be finite and positive");

  const auto& p = w.params;
  ad::Tensor x =
      ad::scale(ad::concat_channels({mtilde, pan}), 1.0 / range);
  x = ad::relu(conv_bias(x, p[0], p[1]));
  x = ad::relu(conv_bias(x, p[2], p[3]));
  x = rcbam_t(x, p[4], p[5], p[6], p[7], p[8], p[9]);
  x = resblock_t(x, p[10], p[11], p[12], p[13]);
  x = rcbam_t(x, p[14], p[15], p[16], p[17], p[18], p[19]);
  x = resblock_t(x, p[20], p[21], p[22], p[23]);
  ad::Tensor residual = conv_bias(x, p[24], p[25]);
  return ad::add(mtilde, ad::scale(residual, range));
}

Raster forward(const ModelWeights& w, const Raster& pan, const Raster& mtilde) {
  pan.validate("forward pan");
  mtilde.validate("forward mtilde");
  ad::Tensor out =
      forward_t(w, pan.to_tensor(), mtilde.to_tensor(), pan.range_span());
  return Raster::from_tensor(out, mtilde.radiometric_range);
}

void save_weights(const std::string& path, const ModelWeights& w) {
  check_weights(w, "save_weights");
  nlohmann::json manifest;
  manifest["format"] = "pansharp-weights";
  manifest["version"] = 1;
  manifest["bands"] = w.bands;
  manifest["seed"] = w.seed;
  auto& layers = manifest["layers"] = nlohmann::json::array();
  const auto& specs = layout(w.bands);
  for (const auto& s : specs) {
    layers.push_back({{"name", s.name},
                      {"shape", {s.shape.n, s.shape.c, s.shape.h, s.shape.w}}});
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError("save_weights: cannot open " + path);
  out << manifest.dump() << '\n';
  for (const auto& t : w.params) {
    auto data = t.data();
    std::vector<float> f32(data.begin(), data.end());
    out.write(reinterpret_cast<const char*>(f32.data()),
              static_cast<std::streamsize>(f32.size() * sizeof(float)));
  }
  if (!out) throw LoadError("save_weights: write failed for " + path);
}

ModelWeights load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("load_weights: cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw LoadError("load_weights: missing manifest in " + path);

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("load_weights: bad manifest in " + path + ": " + e.what());
  }
  if (manifest.value("format", "") != "pansharp-weights" ||
      manifest.value("version", 0) != 1)
    throw LoadError("load_weights: unrecognized format in " + path);

  ModelWeights w;
  w.bands = manifest.at("bands").get<i64>();
  w.seed = manifest.at("seed").get<std::uint64_t>();
  const auto& specs = layout(w.bands);
  if (manifest.at("layers").size() != specs.size())
    throw LoadError("load_weights: layer list mismatch in " + path);

  for (const auto& s : specs) {
    const i64 n = s.shape.numel();
    std::vector<float> f32(static_cast<size_t>(n));
    in.read(reinterpret_cast<char*>(f32.data()),
            static_cast<std::streamsize>(f32.size() * sizeof(float)));
    if (!in)
      throw LoadError("load_weights: truncated payload in " + path + " at " +
                      s.name);
    std::vector<double> data(f32.begin(), f32.end());
    w.params.push_back(ad::Tensor::from_data(s.shape, std::move(data)));
  }
  if (in.get() != std::ifstream::traits_type::eof())
    throw LoadError("load_weights: trailing bytes in " + path);
  check_weights(w, "load_weights");
  return w;
}

}  // namespace pansharp::model
