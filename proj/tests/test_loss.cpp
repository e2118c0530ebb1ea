#include <cmath>
#include <random>
#include <span>
#include <vector>

#include <doctest.h>

#include "pansharp/coregistration.hpp"
#include "pansharp/errors.hpp"
#include "pansharp/grad_check.hpp"
#include "pansharp/loss.hpp"
#include "pansharp/metrics.hpp"
#include "pansharp/ops.hpp"
#include "pansharp/resample.hpp"
#include "pansharp/synthetic.hpp"

using namespace pansharp;
using ad::Tensor;

namespace {

coreg::AlignmentVector zero_alignment(i64 bands) {
  coreg::AlignmentVector a;
  a.shifts.assign(static_cast<size_t>(bands), {0.0, 0.0});
  return a;
}

Raster random_raster(i64 bands, i64 h, i64 w, std::uint64_t seed,
                     double lo = 200.0, double hi = 1800.0) {
  Raster r = Raster::make(bands, h, w);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : r.values) v = u(rng);
  return r;
}

double grad_norm2(std::span<const double> g) {
  double s = 0.0;
  for (double v : g) s += v * v;
  return s;
}

}  // namespace

TEST_CASE("LossConfig validation") {
  loss::LossConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  loss::LossConfig bad = cfg;
  bad.gamma = -0.1;
  CHECK_THROWS_AS(bad.validate(), ContractViolation);
  bad = cfg;
  bad.beta = std::nan("");
  CHECK_THROWS_AS(bad.validate(), ContractViolation);
  bad = cfg;
  bad.sigma = 1;
  CHECK_THROWS_AS(bad.validate(), ContractViolation);
  bad = cfg;
  bad.eps = 0.0;
  CHECK_THROWS_AS(bad.validate(), ContractViolation);
}

TEST_CASE("spectral loss vanishes on MTF-consistent truth") {
  SensorSpec spec;
  auto scene = make_synthetic_scene(301, 64, 4, spec, {});
  loss::LossConfig cfg;
  loss::LossBreakdown bd;
  Tensor l = loss::spectral_loss(scene.truth.to_tensor(), scene.ms,
                                 zero_alignment(4), spec, cfg, &bd);
  CHECK(std::abs(l.item()) < 1e-9);
  CHECK(std::abs(bd.spectral_dlambda) < 1e-9);
  CHECK(bd.spectral_ergas == 0.0);
}

TEST_CASE("gamma zero reduces spectral loss to d_lambda") {
  SensorSpec spec;
  auto scene = make_synthetic_scene(302, 64, 3, spec, {});
  Raster noisy = scene.truth;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-40.0, 40.0);
  for (double& v : noisy.values) v += u(rng);

  loss::LossConfig cfg;
  cfg.gamma = 0.0;
  loss::LossBreakdown bd;
  Tensor l = loss::spectral_loss(noisy.to_tensor(), scene.ms, zero_alignment(3),
                                 spec, cfg, &bd);
  CHECK(l.item() == bd.spectral_dlambda);
  CHECK(l.item() > 0.0);
}

TEST_CASE("correct alignment scores below zero alignment on shifted scene") {
  SensorSpec spec;
  const std::vector<std::array<double, 2>> shifts = {
      {2.0, -1.5}, {-0.5, 1.0}, {1.0, 0.5}, {0.0, -2.0}};
  auto scene = make_synthetic_scene(303, 64, 4, spec, shifts);
  loss::LossConfig cfg;

  coreg::AlignmentVector a_true;
  a_true.shifts = shifts;
  Tensor mhat = scene.truth.to_tensor();
  const double with_a =
      loss::spectral_loss(mhat, scene.ms, a_true, spec, cfg).item();
  const double without_a =
      loss::spectral_loss(mhat, scene.ms, zero_alignment(4), spec, cfg).item();
  CHECK(with_a < without_a);
  CHECK(with_a < 0.5 * without_a);

  loss::LossConfig disabled = cfg;
  disabled.alignment_enabled = false;
  const double flag_off =
      loss::spectral_loss(mhat, scene.ms, a_true, spec, disabled).item();
  CHECK(flag_off == without_a);
}

TEST_CASE("spatial loss equals the detached d_rho metric") {
  SensorSpec spec;
  auto scene = make_synthetic_scene(304, 64, 3, spec, {});
  auto rho_max = coreg::reference_correlation_field(scene.pan, scene.ms, spec);

  Raster mhat = random_raster(3, 64, 64, 11);
  loss::LossConfig cfg;
  double fraction = -1.0;
  Tensor l =
      loss::spatial_loss(mhat.to_tensor(), scene.pan, rho_max, cfg, &fraction);
  const double metric =
      metrics::d_rho(mhat, scene.pan, rho_max, cfg.sigma, cfg.eps);
  CHECK(l.item() == metric);
  CHECK(fraction > 0.0);
  CHECK(fraction <= 1.0);
}

TEST_CASE("spatial loss is zero with zero gradient on affine bands") {
  SensorSpec spec;
  auto scene = make_synthetic_scene(305, 64, 2, spec, {});
  auto rho_max = coreg::reference_correlation_field(scene.pan, scene.ms, spec);

  Raster affine = Raster::make(2, 64, 64);
  for (i64 y = 0; y < 64; ++y)
    for (i64 x = 0; x < 64; ++x) {
      affine.at(0, y, x) = 0.7 * scene.pan.at(0, y, x) + 120.0;
      affine.at(1, y, x) = 1.3 * scene.pan.at(0, y, x) + 15.0;
    }

  ad::Tape tape;
  Tensor mhat = tape.leaf(affine.to_tensor());
  loss::LossConfig cfg;
  Tensor l = loss::spatial_loss(mhat, scene.pan, rho_max, cfg);
  CHECK(l.item() == 0.0);
  auto grads = tape.backward(l);
  for (double v : grads.of(mhat)) CHECK(v == 0.0);
}

TEST_CASE("spatial gradient is zero where every covering window is inactive") {
  SensorSpec spec;
  auto scene = make_synthetic_scene(306, 64, 2, spec, {});
  auto rho_max = coreg::reference_correlation_field(scene.pan, scene.ms, spec);

  Raster mhat = random_raster(2, 64, 64, 21);
  ad::Tape tape;
  Tensor leaf = tape.leaf(mhat.to_tensor());
  loss::LossConfig cfg;
  Tensor l = loss::spatial_loss(leaf, scene.pan, rho_max, cfg);
  CHECK(l.item() > 0.0);
  auto grads = tape.backward(l);
  auto g = grads.of(leaf);
  // rho_max is border-invalid, so windows anchored in the top-left 4x4
  // block are all inactive and the pixels they alone cover get no signal.
  for (i64 b = 0; b < 2; ++b)
    for (i64 y = 0; y < 4; ++y)
      for (i64 x = 0; x < 4; ++x)
        CHECK(g[static_cast<size_t>((b * 64 + y) * 64 + x)] == 0.0);
}

TEST_CASE("spatial loss is non-increasing under affine blending toward pan") {
  SensorSpec spec;
  auto scene = make_synthetic_scene(307, 64, 2, spec, {});
  auto rho_max = coreg::reference_correlation_field(scene.pan, scene.ms, spec);

  Raster x = random_raster(2, 64, 64, 31);
  Raster target = Raster::make(2, 64, 64);
  for (i64 y = 0; y < 64; ++y)
    for (i64 xx = 0; xx < 64; ++xx) {
      target.at(0, y, xx) = 0.8 * scene.pan.at(0, y, xx) + 90.0;
      target.at(1, y, xx) = 1.1 * scene.pan.at(0, y, xx) + 40.0;
    }

  loss::LossConfig cfg;
  double prev = std::numeric_limits<double>::infinity();
  for (double lambda : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    Raster mix = Raster::make(2, 64, 64);
    for (size_t i = 0; i < mix.values.size(); ++i)
      mix.values[i] = (1.0 - lambda) * x.values[i] + lambda * target.values[i];
    const double l = loss::spatial_loss(mix.to_tensor(), scene.pan, rho_max, cfg)
                         .item();
    CHECK(l <= prev + 1e-12);
    prev = l;
  }
  CHECK(prev == 0.0);
}

TEST_CASE("one gradient step from EXP decreases the spatial loss") {
  SensorSpec spec;
  auto scene = make_synthetic_scene(308, 64, 3, spec, {});
  auto rho_max = coreg::reference_correlation_field(scene.pan, scene.ms, spec);
  Raster exp_baseline = upsample_poly23(scene.ms, spec.ratio);

  ad::Tape tape;
  Tensor leaf = tape.leaf(exp_baseline.to_tensor());
  loss::LossConfig cfg;
  Tensor l0 = loss::spatial_loss(leaf, scene.pan, rho_max, cfg);
  const double v0 = l0.item();
  CHECK(v0 > 0.0);

  auto grads = tape.backward(l0);
  auto g = grads.of(leaf);
  const double eta = 0.01 * v0 / grad_norm2(g);
  std::vector<double> stepped = exp_baseline.values;
  for (size_t i = 0; i < stepped.size(); ++i) stepped[i] -= eta * g[i];
  Tensor moved = Tensor::from_data(leaf.shape(), stepped);
  const double v1 = loss::spatial_loss(moved, scene.pan, rho_max, cfg).item();
  CHECK(v1 < v0);
}

TEST_CASE("total loss: breakdown identity and beta zero") {
  SensorSpec spec;
  const std::vector<std::array<double, 2>> shifts = {{0.5, -1.0}, {1.5, 0.0}};
  auto scene = make_synthetic_scene(309, 64, 2, spec, shifts);
  auto product = coreg::estimate_band_shifts(scene.pan, scene.ms, spec);

  Raster mhat = upsample_poly23(scene.ms, spec.ratio);
  loss::LossConfig cfg;
  loss::LossBreakdown bd;
  Tensor total = loss::total_loss(mhat.to_tensor(), scene.pan, scene.ms, product,
                                  spec, cfg, bd);
  CHECK(std::abs(bd.total - (bd.spectral_dlambda + cfg.gamma * bd.spectral_ergas +
                             cfg.beta * bd.spatial)) < 1e-10);
  CHECK(bd.total == total.item());
  CHECK(bd.fraction_active > 0.0);

  loss::LossConfig b0 = cfg;
  b0.beta = 0.0;
  loss::LossBreakdown bd0;
  Tensor t0 = loss::total_loss(mhat.to_tensor(), scene.pan, scene.ms, product,
                               spec, b0, bd0);
  const double spectral_only =
      loss::spectral_loss(mhat.to_tensor(), scene.ms, product.a, spec, b0).item();
  CHECK(t0.item() == spectral_only);
}

TEST_CASE("total loss gradient matches finite differences on 4-band scene") {
  SensorSpec spec;
  Raster m = random_raster(4, 4, 4, 41, 300.0, 1500.0);
  Raster pan = random_raster(1, 16, 16, 42, 300.0, 1500.0);

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

  Tensor mhat0 = random_raster(4, 16, 16, 43, 300.0, 1500.0).to_tensor();
  loss::LossConfig cfg;
  auto rep = ad::grad_check(
      [&](ad::Tape&, const std::vector<Tensor>& pts) {
        loss::LossBreakdown bd;
        return loss::total_loss(pts[0], pan, m, product, spec, cfg, bd);
      },
      {mhat0}, 1e-4, 1e-3, 80);
  INFO(rep.worst);
  CHECK(rep.pass);
  CHECK(rep.checked > 0);
}

TEST_CASE("l1 spectral variant: identity, constant offset, gradients") {
  SensorSpec spec;
  auto scene = make_synthetic_scene(310, 32, 2, spec, {});
  Tensor truth_t = scene.truth.to_tensor();
  CHECK(loss::l1_spectral_loss(truth_t, scene.ms, spec).item() == 0.0);

  Raster offset = scene.truth;
  for (double& v : offset.values) v += 75.0;
  const double c =
      loss::l1_spectral_loss(offset.to_tensor(), scene.ms, spec).item();
  CHECK(std::abs(c - 75.0) < 1e-9);

  Tensor mhat0 = random_raster(2, 8, 8, 51, 500.0, 900.0).to_tensor();
  Raster mref = random_raster(2, 2, 2, 52, 1200.0, 1600.0);
  auto rep = ad::grad_check(
      [&](ad::Tape&, const std::vector<Tensor>& pts) {
        return loss::l1_spectral_loss(pts[0], mref, spec);
      },
      {mhat0}, 1e-4, 1e-3, 60);
  INFO(rep.worst);
  CHECK(rep.pass);

  loss::LossConfig cfg;
  cfg.variant = loss::SpectralVariant::L1;
  auto scene2 = make_synthetic_scene(311, 64, 2, spec, {});
  auto product = coreg::estimate_band_shifts(scene2.pan, scene2.ms, spec);
  loss::LossBreakdown bd;
  Tensor total = loss::total_loss(upsample_poly23(scene2.ms, spec.ratio).to_tensor(),
                                  scene2.pan, scene2.ms, product, spec, cfg, bd);
  CHECK(bd.spectral_ergas == 0.0);
  CHECK(std::abs(bd.total - (bd.spectral_dlambda + cfg.beta * bd.spatial)) <
        1e-10);
  CHECK(total.item() == bd.total);
}

TEST_CASE("non-finite inputs raise numeric failures") {
  SensorSpec spec;
  auto scene = make_synthetic_scene(312, 32, 2, spec, {});
  Raster poisoned = scene.truth;
  poisoned.values[100] = std::nan("");
  Tensor bad = ad::Tensor::from_data({1, 2, 32, 32}, poisoned.values);

  loss::LossConfig cfg;
  CHECK_THROWS_AS((void)loss::spectral_loss(bad, scene.ms, zero_alignment(2),
                                            spec, cfg),
                  NumericFailure);

  auto rho_max = coreg::reference_correlation_field(scene.pan, scene.ms, spec);
  CHECK_THROWS_AS((void)loss::spatial_loss(bad, scene.pan, rho_max, cfg),
                  NumericFailure);
}

TEST_CASE("loss input contracts") {
  SensorSpec spec;
  auto scene = make_synthetic_scene(313, 32, 2, spec, {});
  Tensor wrong = random_raster(2, 24, 24, 61).to_tensor();
  loss::LossConfig cfg;
  CHECK_THROWS_AS((void)loss::spectral_loss(wrong, scene.ms, zero_alignment(2),
                                            spec, cfg),
                  ContractViolation);

  coreg::AlignmentVector short_a;
  short_a.shifts = {{0.0, 0.0}};
  CHECK_THROWS_AS((void)loss::spectral_loss(scene.truth.to_tensor(), scene.ms,
                                            short_a, spec, cfg),
                  ContractViolation);
}
