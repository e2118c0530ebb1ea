#include <array>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "config.hpp"
#include "pansharp/adaptation.hpp"
#include "pansharp/coregistration.hpp"
#include "pansharp/errors.hpp"
#include "pansharp/grad_check.hpp"
#include "pansharp/loss.hpp"
#include "pansharp/metrics.hpp"
#include "pansharp/model.hpp"
#include "pansharp/ops.hpp"
#include "pansharp/raster_io.hpp"
#include "pansharp/resample.hpp"
#include "pansharp/synthetic.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace pansharp;
using ad::i64;

namespace {

struct CommandContext {
  std::string config_path;
  cli::KeyValues overrides;
  std::string out_dir;
};

void add_config_options(CLI::App* cmd, CommandContext& ctx) {
  cmd->add_option("--config", ctx.config_path, "key-value config file");
  for (const auto& k : cli::config_keys())
    cmd->add_option_function<std::string>(
        std::string("--") + k.key,
        [&ctx, key = std::string(k.key)](const std::string& v) {
          ctx.overrides[key] = v;
        },
        k.help);
  cmd->add_option_function<std::string>(
      "--seed",
      [&ctx](const std::string& v) { ctx.overrides["run.seed"] = v; },
      "shorthand for --run.seed");
  cmd->add_option_function<std::string>(
      "--threads",
      [&ctx](const std::string& v) { ctx.overrides["run.threads"] = v; },
      "shorthand for --run.threads");
}

cli::RunConfig load_config(const CommandContext& ctx) {
  const cli::KeyValues file =
      ctx.config_path.empty() ? cli::KeyValues{} : cli::parse_config_file(ctx.config_path);
  return cli::RunConfig::build(file, ctx.overrides);
}

bool key_given(const CommandContext& ctx, const std::string& key) {
  if (ctx.overrides.count(key)) return true;
  if (ctx.config_path.empty()) return false;
  return cli::parse_config_file(ctx.config_path).count(key) > 0;
}

void echo_config(const cli::RunConfig& cfg, const fs::path& dir) {
  std::ofstream out(dir / "config.ini");
  if (!out) throw LoadError("cannot write " + (dir / "config.ini").string());
  out << cfg.to_ini();
}

void write_json_file(const json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

void emit(const json& j, const std::string& out_dir, const std::string& filename,
          const cli::RunConfig& cfg) {
  if (out_dir.empty()) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  fs::create_directories(out_dir);
  echo_config(cfg, out_dir);
  write_json_file(j, fs::path(out_dir) / filename);
}

Raster load_input(const std::string& path) {
  if (path.ends_with(".pgm")) return load_pgm16(path);
  return load_raster(path);
}

void check_pair_shapes(const Raster& pan, const Raster& ms, int ratio) {
  if (pan.bands != 1)
    throw ContractViolation("pan input must be single band, got " +
                            std::to_string(pan.bands));
  if (pan.height != ms.height * ratio || pan.width != ms.width * ratio)
    throw ContractViolation(
        "pan/ms scales must differ by exactly the ratio " + std::to_string(ratio) +
        ": pan " + std::to_string(pan.height) + "x" + std::to_string(pan.width) +
        " vs ms " + std::to_string(ms.height) + "x" + std::to_string(ms.width));
}

coreg::CoregistrationProduct make_product(const Raster& pan, const Raster& ms,
                                          const cli::RunConfig& cfg) {
  coreg::SearchConfig scfg;
  scfg.eps = cfg.loss.eps;
  scfg.rho_max_at_zero_shift = !cfg.loss.alignment_enabled;
  return coreg::estimate_band_shifts(pan, ms, cfg.sensor, scfg);
}

json metric_report(const Raster& mhat, const Raster& pan, const Raster& ms,
                   const coreg::CoregistrationProduct& product,
                   const cli::RunConfig& cfg) {
  const ad::Tensor t = mhat.to_tensor();
  loss::LossConfig lc = cfg.loss;
  lc.variant = loss::SpectralVariant::KhanErgas;

  loss::LossBreakdown aligned{};
  loss::spectral_loss(t, ms, product.a, cfg.sensor, lc, &aligned);

  loss::LossBreakdown zero{};
  loss::LossConfig lc0 = lc;
  lc0.alignment_enabled = false;
  loss::spectral_loss(t, ms, product.a, cfg.sensor, lc0, &zero);

  const double d_rho =
      metrics::d_rho(mhat, pan, product.rho_max, cfg.loss.sigma, cfg.loss.eps);

  return json{{"d_lambda_align", aligned.spectral_dlambda},
              {"r_ergas", aligned.spectral_ergas},
              {"d_lambda", zero.spectral_dlambda},
              {"d_rho", d_rho}};
}

void write_adapt_log(const adapt::AdaptationResult& res, const fs::path& path,
                     bool timings) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write " + path.string());
  for (const auto& r : res.trajectory) {
    json line{{"iter", r.iter},
              {"total", r.breakdown.total},
              {"d_lambda", r.breakdown.spectral_dlambda},
              {"ergas", r.breakdown.spectral_ergas},
              {"spatial", r.breakdown.spatial}};
    if (timings) line["wall_ms"] = r.wall_ms;
    out << line.dump() << "\n";
  }
}

int cmd_pansharpen(const CommandContext& ctx, const std::string& pan_path,
                   const std::string& ms_path, const std::string& weights_path,
                   i64 adapt_iters, bool full_ta, bool timings) {
  cli::RunConfig cfg = load_config(ctx);
  const Raster pan = load_input(pan_path);
  const Raster ms = load_raster(ms_path);
  model::ModelWeights w = model::load_weights(weights_path);
  check_pair_shapes(pan, ms, cfg.sensor.ratio);
  if (w.bands != ms.bands)
    throw ContractViolation("weights are for " + std::to_string(w.bands) +
                            " bands but the MS input has " +
                            std::to_string(ms.bands));

  // Adaptation runs only when --adapt or adapt.iterations asks for it;
  // fast tile selection is the default mode unless configured.
  if (adapt_iters >= 0) cfg.adapt.iterations = adapt_iters;
  else if (!key_given(ctx, "adapt.iterations")) cfg.adapt.iterations = 0;
  if (!key_given(ctx, "adapt.fast")) cfg.adapt.fast = true;
  if (full_ta) cfg.adapt.fast = false;
  cfg.finalize();

  const fs::path out(ctx.out_dir);
  fs::create_directories(out);
  echo_config(cfg, out);

  const coreg::CoregistrationProduct product = make_product(pan, ms, cfg);

  if (cfg.adapt.iterations > 0) {
    const adapt::AdaptationResult res =
        adapt::target_adapt(w, pan, ms, product, cfg.adapt);
    write_adapt_log(res, out / "adapt_log.jsonl", timings);
    model::save_weights((out / "weights_adapted.ckpt").string(), res.weights);
    if (res.aborted)
      throw NumericFailure("adaptation aborted at iteration " +
                           std::to_string(res.abort_iteration) + ": " +
                           res.abort_reason);
    w = res.weights;
  }

  const Raster mtilde = upsample_poly23(ms, cfg.sensor.ratio);
  const Raster mhat = model::forward(w, pan, mtilde);
  save_raster(mhat, (out / "mhat").string());
  write_json_file(metric_report(mhat, pan, ms, product, cfg), out / "report.json");
  return 0;
}

int cmd_metrics(const CommandContext& ctx, const std::string& fused_path,
                const std::string& pan_path, const std::string& ms_path,
                bool no_align) {
  cli::RunConfig cfg = load_config(ctx);
  if (no_align) {
    cfg.loss.alignment_enabled = false;
    cfg.finalize();
  }
  const Raster fused = load_raster(fused_path);
  const Raster pan = load_input(pan_path);
  const Raster ms = load_raster(ms_path);
  check_pair_shapes(pan, ms, cfg.sensor.ratio);
  if (fused.bands != ms.bands || fused.height != pan.height ||
      fused.width != pan.width)
    throw ContractViolation(
        "fused raster must have the MS bands at the PAN grid: got " +
        std::to_string(fused.bands) + "x" + std::to_string(fused.height) + "x" +
        std::to_string(fused.width));

  const coreg::CoregistrationProduct product = make_product(pan, ms, cfg);
  emit(metric_report(fused, pan, ms, product, cfg), ctx.out_dir, "report.json", cfg);
  return 0;
}

int cmd_align(const CommandContext& ctx, const std::string& pan_path,
              const std::string& ms_path) {
  const cli::RunConfig cfg = load_config(ctx);
  const Raster pan = load_input(pan_path);
  const Raster ms = load_raster(ms_path);
  check_pair_shapes(pan, ms, cfg.sensor.ratio);
  const coreg::CoregistrationProduct product = make_product(pan, ms, cfg);
  emit(json{{"band_shifts", product.a.shifts},
            {"scores", product.scores},
            {"zero_scores", product.zero_scores}},
       ctx.out_dir, "align.json", cfg);
  return 0;
}

int cmd_select_tiles(const CommandContext& ctx, const std::string& pan_path,
                     const std::string& ms_path, bool strict) {
  const cli::RunConfig cfg = load_config(ctx);
  const Raster pan = load_input(pan_path);
  const Raster ms = load_raster(ms_path);
  check_pair_shapes(pan, ms, cfg.sensor.ratio);
  const adapt::TileSet ts = adapt::select_tiles(pan, ms, cfg.adapt, strict);
  emit(json{{"tile", ts.tile},
            {"anchors", ts.anchors},
            {"clusters", ts.clusters},
            {"features", ts.features}},
       ctx.out_dir, "tiles.json", cfg);
  return 0;
}

std::vector<std::array<double, 2>> parse_shifts(const std::string& text) {
  std::vector<std::array<double, 2>> shifts;
  if (text.empty()) return shifts;
  std::stringstream ss(text);
  std::string pair;
  while (std::getline(ss, pair, ';')) {
    const auto comma = pair.find(',');
    if (comma == std::string::npos)
      throw ContractViolation("--shifts: expected 'dx,dy;dx,dy;...', got '" + pair +
                              "'");
    try {
      shifts.push_back({std::stod(pair.substr(0, comma)),
                        std::stod(pair.substr(comma + 1))});
    } catch (const std::exception&) {
      throw ContractViolation("--shifts: bad number in '" + pair + "'");
    }
  }
  return shifts;
}

int cmd_synth(const CommandContext& ctx, i64 size, i64 bands,
              const std::string& shifts_text) {
  cli::RunConfig cfg = load_config(ctx);
  const auto shifts = parse_shifts(shifts_text);
  if (!shifts.empty() && static_cast<i64>(shifts.size()) != bands)
    throw ContractViolation("--shifts must give one dx,dy pair per band");
  const SyntheticScene scene =
      make_synthetic_scene(cfg.seed, size, bands, cfg.sensor, shifts);

  const fs::path out(ctx.out_dir);
  fs::create_directories(out);
  echo_config(cfg, out);
  save_raster(scene.truth, (out / "truth").string());
  save_raster(scene.pan, (out / "pan").string());
  save_raster(scene.ms, (out / "ms").string());
  write_json_file(json{{"seed", scene.record.seed},
                       {"size", size},
                       {"bands", bands},
                       {"band_shifts", scene.record.band_shifts},
                       {"pan_weights", scene.record.pan_weights},
                       {"pan_detail_amplitude", scene.record.pan_detail_amplitude}},
                  out / "manifest.json");
  return 0;
}

int cmd_init_weights(const CommandContext& ctx, const std::string& out_path,
                     i64 bands, bool zero_trunk) {
  const cli::RunConfig cfg = load_config(ctx);
  model::ModelWeights w = model::init_model(bands, cfg.seed);
  if (zero_trunk)
    for (auto& p : w.params) p = ad::Tensor::zeros(p.shape());
  model::save_weights(out_path, w);
  return 0;
}

// Short finite-difference gate over the differentiable surface: the
// network forward and both total-loss variants.
int cmd_gradcheck(const CommandContext& ctx) {
  const cli::RunConfig cfg = load_config(ctx);
  std::mt19937_64 rng(cfg.seed + 12345);
  auto random_tensor = [&](ad::Shape s, double lo, double hi) {
    std::vector<double> data(static_cast<size_t>(s.numel()));
    for (double& v : data)
      v = lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
    return ad::Tensor::from_data(s, std::move(data));
  };

  bool all_pass = true;
  auto run_case = [&](const std::string& name, const ad::GradCheckReport& rep) {
    std::cout << json{{"case", name},
                      {"max_rel_err", rep.max_rel_err},
                      {"checked", rep.checked},
                      {"skipped_kinks", rep.skipped_kinks},
                      {"pass", rep.pass}}
                     .dump()
              << "\n";
    if (!rep.pass) all_pass = false;
  };

  {
    auto w = model::init_model(2, cfg.seed + 1);
    std::vector<ad::Tensor> points = w.params;
    points.push_back(random_tensor({1, 1, 8, 8}, 100.0, 1900.0));
    points.push_back(random_tensor({1, 2, 8, 8}, 100.0, 1900.0));
    run_case("model_forward",
             ad::grad_check(
                 [&](ad::Tape&, const std::vector<ad::Tensor>& pts) {
                   model::ModelWeights live;
                   live.bands = 2;
                   live.params.assign(pts.begin(), pts.end() - 2);
                   ad::Tensor mhat = model::forward_t(
                       live, pts[pts.size() - 2], pts[pts.size() - 1], 2047.0);
                   return ad::mean(ad::square(ad::scale(mhat, 1.0 / 2047.0)));
                 },
                 points, 1e-4, 1e-3, 4, cfg.seed));
  }

  SensorSpec spec = cfg.sensor;
  const SyntheticScene scene = make_synthetic_scene(cfg.seed + 2, 16, 4, spec,
                                                    {{0.5, -0.5}, {0, 0}, {1, 0}, {0, 0.5}});
  // Hand-built product: the scene is below the shift-search minimum and
  // only the loss differentiation is under test here.
  coreg::CoregistrationProduct product;
  product.a.shifts = {{0.5, -0.5}, {1.0, 0.0}, {0.0, 0.0}, {-0.5, 0.5}};
  product.rho_max.bands = 4;
  product.rho_max.height = 16;
  product.rho_max.width = 16;
  product.rho_max.window = 16;
  product.rho_max.values.assign(4 * 16 * 16, 0.99);
  product.rho_max.mask = Mask::full(4, 16, 16);
  product.scores.assign(4, 1.0);
  product.zero_scores.assign(4, 1.0);
  const ad::Tensor mhat0 = random_tensor({1, 4, 16, 16}, 300.0, 1500.0);

  for (const auto variant :
       {loss::SpectralVariant::KhanErgas, loss::SpectralVariant::L1}) {
    loss::LossConfig lc = cfg.loss;
    lc.variant = variant;
    run_case(variant == loss::SpectralVariant::L1 ? "total_loss_l1" : "total_loss",
             ad::grad_check(
                 [&](ad::Tape&, const std::vector<ad::Tensor>& pts) {
                   loss::LossBreakdown bd;
                   return loss::total_loss(pts[0], scene.pan, scene.ms, product,
                                           spec, lc, bd);
                 },
                 {mhat0}, 1e-4, 1e-3, 80, cfg.seed));
  }

  if (!all_pass) throw NumericFailure("gradient check failed");
  return 0;
}

int dispatch(const std::function<int()>& body) {
  try {
    return body();
  } catch (const NumericFailure& e) {
    std::cerr << "error (numeric): " << e.what() << "\n";
  } catch (const NumericDomainError& e) {
    std::cerr << "error (numeric): " << e.what() << "\n";
  } catch (const InsufficientSupport& e) {
    std::cerr << "error (numeric): " << e.what() << "\n";
    return 1;
  } catch (const LoadError& e) {
    std::cerr << "error (input): " << e.what() << "\n";
    return 2;
  } catch (const UnsupportedConfig& e) {
    std::cerr << "error (config): " << e.what() << "\n";
    return 2;
  } catch (const ContractViolation& e) {
    std::cerr << "error (config): " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"unsupervised full-resolution pansharpening toolkit"};
  app.require_subcommand(1);

  CommandContext ctx;
  std::string pan_path, ms_path, fused_path, weights_path, out_path, shifts_text;
  i64 adapt_iters = -1, size = 256, bands = 4;
  bool full_ta = false, timings = false, no_align = false, strict = false,
       zero_trunk = false;

  CLI::App* c_pansharpen =
      app.add_subcommand("pansharpen", "fuse a PAN/MS pair with a weights file");
  c_pansharpen->add_option("--pan", pan_path, "PAN raster (or 16-bit PGM)")->required();
  c_pansharpen->add_option("--ms", ms_path, "MS raster")->required();
  c_pansharpen->add_option("--weights", weights_path, "model checkpoint")->required();
  c_pansharpen->add_option("-o,--out", ctx.out_dir, "output directory")->required();
  c_pansharpen->add_option("--adapt", adapt_iters,
                           "target-adaptation iterations before fusing");
  c_pansharpen->add_flag("--full-ta", full_ta,
                         "adapt on the whole image instead of selected tiles");
  c_pansharpen->add_flag("--timings", timings, "include wall_ms in the adaptation log");
  add_config_options(c_pansharpen, ctx);

  CLI::App* c_metrics =
      app.add_subcommand("metrics", "score an existing fused product");
  c_metrics->add_option("--fused", fused_path, "fused raster")->required();
  c_metrics->add_option("--pan", pan_path, "PAN raster (or 16-bit PGM)")->required();
  c_metrics->add_option("--ms", ms_path, "MS raster")->required();
  c_metrics->add_option("-o,--out", ctx.out_dir, "output directory (default: stdout)");
  c_metrics->add_flag("--no-align", no_align, "score the spectral terms at zero shift");
  add_config_options(c_metrics, ctx);

  CLI::App* c_align =
      app.add_subcommand("align", "estimate per-band subpixel shifts");
  c_align->add_option("--pan", pan_path, "PAN raster (or 16-bit PGM)")->required();
  c_align->add_option("--ms", ms_path, "MS raster")->required();
  c_align->add_option("-o,--out", ctx.out_dir, "output directory (default: stdout)");
  add_config_options(c_align, ctx);

  CLI::App* c_tiles = app.add_subcommand(
      "select-tiles", "pick representative tiles for fast adaptation");
  c_tiles->add_option("--pan", pan_path, "PAN raster (or 16-bit PGM)")->required();
  c_tiles->add_option("--ms", ms_path, "MS raster")->required();
  c_tiles->add_option("-o,--out", ctx.out_dir, "output directory (default: stdout)");
  c_tiles->add_flag("--strict", strict, "fail instead of reducing the cluster count");
  add_config_options(c_tiles, ctx);

  CLI::App* c_synth = app.add_subcommand("synth", "generate a synthetic scene");
  c_synth->add_option("-o,--out", ctx.out_dir, "output directory")->required();
  c_synth->add_option("--size", size, "PAN-scale size (multiple of the ratio)");
  c_synth->add_option("--bands", bands, "MS band count");
  c_synth->add_option("--shifts", shifts_text,
                      "per-band generation shifts 'dx,dy;dx,dy;...'");
  add_config_options(c_synth, ctx);

  CLI::App* c_init = app.add_subcommand("init-weights", "write a fresh checkpoint");
  c_init->add_option("-o,--out", out_path, "checkpoint path")->required();
  c_init->add_option("--bands", bands, "MS band count");
  c_init->add_flag("--zero-trunk", zero_trunk,
                   "all-zero parameters (the fusion becomes the EXP baseline)");
  add_config_options(c_init, ctx);

  CLI::App* c_grad =
      app.add_subcommand("gradcheck", "finite-difference gradient gate");
  add_config_options(c_grad, ctx);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (app.got_subcommand(c_pansharpen))
    return dispatch([&] {
      return cmd_pansharpen(ctx, pan_path, ms_path, weights_path, adapt_iters,
                            full_ta, timings);
    });
  if (app.got_subcommand(c_metrics))
    return dispatch(
        [&] { return cmd_metrics(ctx, fused_path, pan_path, ms_path, no_align); });
  if (app.got_subcommand(c_align))
    return dispatch([&] { return cmd_align(ctx, pan_path, ms_path); });
  if (app.got_subcommand(c_tiles))
    return dispatch([&] { return cmd_select_tiles(ctx, pan_path, ms_path, strict); });
  if (app.got_subcommand(c_synth))
    return dispatch([&] { return cmd_synth(ctx, size, bands, shifts_text); });
  if (app.got_subcommand(c_init))
    return dispatch([&] { return cmd_init_weights(ctx, out_path, bands, zero_trunk); });
  if (app.got_subcommand(c_grad)) return dispatch([&] { return cmd_gradcheck(ctx); });
  return 2;
}
