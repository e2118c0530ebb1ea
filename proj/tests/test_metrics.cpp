#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

#include "oracles.hpp"
#include "pansharp/errors.hpp"
#include "pansharp/grad_check.hpp"
#include "pansharp/metrics.hpp"
#include "pansharp/ops.hpp"
#include "pansharp/raster.hpp"

using namespace pansharp;
using ad::Tensor;
using metrics::MetricConfig;

namespace {

Raster rand_raster(i64 bands, i64 h, i64 w, std::uint64_t seed, double lo,
                   double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  Raster r = Raster::make(bands, h, w);
  for (double& v : r.values) v = d(rng);
  return r;
}

}  // namespace

TEST_CASE("corrcoef: identities, affine invariance, validity") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> d(0.0, 100.0);
  std::vector<double> x(64), negx(64), affine(64);
  for (size_t i = 0; i < x.size(); ++i) {
    x[i] = d(rng);
    negx[i] = -x[i];
    affine[i] = 2.5 * x[i] - 7.0;
  }
  CHECK(metrics::corrcoef(x, x).value == 1.0);
  CHECK(metrics::corrcoef(x, x).valid);
  CHECK(metrics::corrcoef(x, negx).value == -1.0);
  CHECK(std::abs(metrics::corrcoef(x, affine).value - 1.0) < 1e-9);

  std::vector<double> flat(64, 5.0);
  auto r = metrics::corrcoef(x, flat);
  CHECK_FALSE(r.valid);

  std::vector<double> shorter(32, 1.0);
  CHECK_THROWS_AS((void)metrics::corrcoef(x, shorter), ContractViolation);
  std::vector<double> one(1, 1.0);
  CHECK_THROWS_AS((void)metrics::corrcoef(one, one), ContractViolation);
}

TEST_CASE("MetricConfig validation") {
  MetricConfig bad;
  bad.q_window = 1;
  CHECK_THROWS_AS(bad.validate(), ContractViolation);
  bad = MetricConfig{};
  bad.sigma = 1;
  CHECK_THROWS_AS(bad.validate(), ContractViolation);
  bad = MetricConfig{};
  bad.eps = 0.0;
  CHECK_THROWS_AS(bad.validate(), ContractViolation);
  CHECK_NOTHROW(MetricConfig{}.validate());
}

TEST_CASE("local correlation field matches naive per-patch oracle") {
  for (auto [h, w, sigma, seed] :
       {std::tuple<i64, i64, i64, std::uint64_t>{32, 32, 4, 101},
        {20, 24, 5, 102},
        {16, 16, 4, 103}}) {
    Raster a = rand_raster(1, h, w, seed, 100.0, 1900.0);
    Raster m = rand_raster(3, h, w, seed + 50, 100.0, 1900.0);
    auto f = metrics::local_correlation_field(a, m, sigma);
    auto nf = oracles::naive_local_corr_field(a.values, m.values, 3, h, w, sigma,
                                              1e-8);
    REQUIRE(f.values.size() == nf.values.size());
    double worst = 0.0;
    for (size_t i = 0; i < f.values.size(); ++i) {
      CHECK(f.mask.valid[i] == nf.valid[i]);
      if (f.mask.valid[i])
        worst = std::max(worst, std::abs(f.values[i] - nf.values[i]));
    }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("local correlation field: identity band, flat band, margins") {
  const i64 h = 16, w = 20, sigma = 4;
  Raster a = rand_raster(1, h, w, 7, 0.0, 1000.0);
  Raster m = Raster::make(2, h, w);
  for (i64 y = 0; y < h; ++y)
    for (i64 x = 0; x < w; ++x) {
      m.at(0, y, x) = a.at(0, y, x);
      m.at(1, y, x) = 7.0;
    }
  auto f = metrics::local_correlation_field(a, m, sigma);

  i64 valid0 = 0;
  for (i64 y = 0; y < h; ++y)
    for (i64 x = 0; x < w; ++x) {
      if (f.mask.at(0, y, x)) {
        ++valid0;
        CHECK(std::abs(f.at(0, y, x) - 1.0) < 1e-12);
        CHECK(y >= sigma / 2);
        CHECK(y <= h - sigma / 2);
        CHECK(x >= sigma / 2);
        CHECK(x <= w - sigma / 2);
      }
      CHECK_FALSE(f.mask.at(1, y, x));
    }
  CHECK(valid0 == (h - sigma + 1) * (w - sigma + 1));
}

TEST_CASE("local correlation field contracts") {
  Raster a = rand_raster(1, 8, 8, 3, 0.0, 1.0);
  Raster m = rand_raster(2, 8, 8, 4, 0.0, 1.0);
  CHECK_THROWS_AS((void)metrics::local_correlation_field(a, m, 9),
                  ContractViolation);
  Raster wrong = rand_raster(2, 10, 8, 5, 0.0, 1.0);
  CHECK_THROWS_AS((void)metrics::local_correlation_field(a, wrong, 4),
                  ContractViolation);

  Raster a4 = rand_raster(1, 4, 4, 6, 0.0, 1.0);
  Raster m4 = rand_raster(1, 4, 4, 7, 0.0, 1.0);
  auto f = metrics::local_correlation_field(a4, m4, 4);
  CHECK(f.mask.count() == 1);
  CHECK(f.mask.at(0, 2, 2));
}

TEST_CASE("uiqi: identity, luminance penalty, naive oracle") {
  MetricConfig cfg;
  Raster x = rand_raster(1, 64, 64, 21, 100.0, 1900.0);
  CHECK(metrics::uiqi(x, x, cfg) == 1.0);

  Raster shifted = x;
  for (double& v : shifted.values) v += 5000.0;
  CHECK(metrics::uiqi(x, shifted, cfg) < 1.0);

  Raster y = rand_raster(1, 64, 64, 22, 100.0, 1900.0);
  const double got = metrics::uiqi(x, y, cfg);
  const double want =
      oracles::naive_uiqi(x.values, y.values, 1, 64, 64, 32, 32, cfg.eps);
  CHECK(std::abs(got - want) < 1e-9);

  MetricConfig overlap;
  overlap.q_window = 16;
  overlap.q_stride = 8;
  const double got2 = metrics::uiqi(x, y, overlap);
  const double want2 =
      oracles::naive_uiqi(x.values, y.values, 1, 64, 64, 16, 8, overlap.eps);
  CHECK(std::abs(got2 - want2) < 1e-9);
}

TEST_CASE("ergas: identities, hand value, degenerate reference") {
  Raster x = rand_raster(3, 16, 16, 31, 100.0, 1900.0);
  CHECK(metrics::ergas(x, x, 4) == 0.0);

  Raster y = rand_raster(3, 16, 16, 32, 100.0, 1900.0);
  const double base = metrics::ergas(y, x, 4);
  CHECK(base > 0.0);
  CHECK(std::abs(base - oracles::naive_ergas(y.values, x.values, 3, 16, 16, 4)) <
        1e-9);

  Raster cx = x, cy = y;
  for (double& v : cx.values) v *= 3.7;
  for (double& v : cy.values) v *= 3.7;
  CHECK(std::abs(metrics::ergas(cy, cx, 4) - base) < 1e-12);

  Raster hx = Raster::make(1, 2, 2, 10.0);
  Raster hy = Raster::make(1, 2, 2, 11.0);
  CHECK(std::abs(metrics::ergas(hy, hx, 4) - 2.5) < 1e-12);

  Raster zx = Raster::make(2, 2, 2, 5.0);
  zx.at(1, 0, 0) = 1.0;
  zx.at(1, 0, 1) = -1.0;
  zx.at(1, 1, 0) = 2.0;
  zx.at(1, 1, 1) = -2.0;
  Raster zy = rand_raster(2, 2, 2, 33, 0.0, 1.0);
  try {
    (void)metrics::ergas(zy, zx, 4);
    FAIL("expected NumericDomainError");
  } catch (const NumericDomainError& e) {
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }

  Raster wrong = rand_raster(3, 8, 16, 34, 0.0, 1.0);
  CHECK_THROWS_AS((void)metrics::ergas(wrong, x, 4), ContractViolation);
}

TEST_CASE("cayley-dickson basis table: complex, quaternion, octonion") {
  auto c = metrics::cayley_dickson_table(2);
  CHECK(c[1][1].k == 0);
  CHECK(c[1][1].sign == -1);
  CHECK(c[0][1].k == 1);
  CHECK(c[0][1].sign == 1);

  auto q = metrics::cayley_dickson_table(4);
  for (int i = 1; i < 4; ++i) {
    CHECK(q[i][i].k == 0);
    CHECK(q[i][i].sign == -1);
    CHECK(q[0][i].k == i);
    CHECK(q[0][i].sign == 1);
  }
  CHECK(q[1][2].k == 3);
  CHECK(q[2][1].k == 3);
  CHECK(q[1][2].sign == -q[2][1].sign);

  auto o = metrics::cayley_dickson_table(8);
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> a(8), b(8);
  for (int t = 0; t < 5; ++t) {
    for (auto& v : a) v = d(rng);
    for (auto& v : b) v = d(rng);
    auto ab = oracles::cd_mul(a, b);
    double na = 0, nb = 0, nab = 0;
    for (int i = 0; i < 8; ++i) {
      na += a[i] * a[i];
      nb += b[i] * b[i];
      nab += ab[i] * ab[i];
    }
    CHECK(std::abs(nab - na * nb) < 1e-12 * std::max(1.0, na * nb));
  }
  for (int i = 1; i < 8; ++i)
    for (int j = 1; j < 8; ++j) {
      if (i == j) continue;
      CHECK(o[i][j].k == o[j][i].k);
      CHECK(o[i][j].sign == -o[j][i].sign);
    }

  for (int dim : {1, 2, 4, 8}) {
    auto table = metrics::cayley_dickson_table(dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) {
        std::vector<double> ei(static_cast<size_t>(dim), 0.0), ej(ei);
        ei[static_cast<size_t>(i)] = 1.0;
        ej[static_cast<size_t>(j)] = 1.0;
        auto prod = oracles::cd_mul(ei, ej);
        CHECK(prod[static_cast<size_t>(table[i][j].k)] ==
              static_cast<double>(table[i][j].sign));
      }
  }
}

TEST_CASE("q2n: self-identity, symmetry, band permutation, range") {
  MetricConfig cfg;
  cfg.q_window = 16;
  cfg.q_stride = 16;
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> noise(-60.0, 60.0);
  Raster x = Raster::make(4, 32, 32);
  for (i64 b = 0; b < 4; ++b)
    for (i64 y = 0; y < 32; ++y)
      for (i64 xq = 0; xq < 32; ++xq)
        x.at(b, y, xq) = 400.0 + 250.0 * static_cast<double>(b) + noise(rng);

  CHECK(std::abs(metrics::q2n(x, x, cfg) - 1.0) < 1e-12);

  Raster y = x;
  for (double& v : y.values) v += noise(rng) * 0.3;
  CHECK(metrics::q2n(x, y, cfg) == metrics::q2n(y, x, cfg));

  Raster perm = Raster::make(4, 32, 32);
  for (i64 b = 0; b < 4; ++b)
    for (i64 yy = 0; yy < 32; ++yy)
      for (i64 xq = 0; xq < 32; ++xq) perm.at(b, yy, xq) = x.at(3 - b, yy, xq);
  CHECK(metrics::q2n(x, perm, cfg) < 0.999);

  for (std::uint64_t s = 60; s < 63; ++s) {
    Raster u = rand_raster(3, 32, 32, s, 100.0, 1900.0);
    Raster v = rand_raster(3, 32, 32, s + 10, 100.0, 1900.0);
    const double qv = metrics::q2n(u, v, cfg);
    CHECK(qv >= 0.0);
    CHECK(qv <= 1.0);
  }
}

TEST_CASE("q2n matches direct hypercomplex oracle") {
  MetricConfig cfg;
  cfg.q_window = 8;
  cfg.q_stride = 8;
  for (auto [bands, seed] : {std::pair<i64, std::uint64_t>{2, 71},
                             {3, 72},
                             {4, 73},
                             {5, 74}}) {
    Raster x = rand_raster(bands, 32, 32, seed, 100.0, 1900.0);
    Raster y = rand_raster(bands, 32, 32, seed + 100, 100.0, 1900.0);
    const double got = metrics::q2n(x, y, cfg);
    const double want =
        oracles::naive_q2n(x.values, y.values, bands, 32, 32, 8, 8, cfg.eps);
    CHECK(std::abs(got - want) < 1e-9);
  }
}

TEST_CASE("q2n with one band reduces to uiqi on the same windows") {
  MetricConfig cfg;
  cfg.q_window = 8;
  cfg.q_stride = 8;
  Raster x = rand_raster(1, 32, 32, 81, 200.0, 1800.0);
  Raster y = x;
  std::mt19937_64 rng(82);
  std::uniform_real_distribution<double> d(-20.0, 20.0);
  for (double& v : y.values) v = 0.8 * v + 300.0 + d(rng);
  CHECK(std::abs(metrics::q2n(x, y, cfg) - metrics::uiqi(x, y, cfg)) < 1e-9);
}

TEST_CASE("q2n window clamps to small images; band limit enforced") {
  MetricConfig cfg;  // 32x32 default window
  Raster x = rand_raster(2, 16, 16, 91, 100.0, 1900.0);
  Raster y = rand_raster(2, 16, 16, 92, 100.0, 1900.0);
  MetricConfig explicit16;
  explicit16.q_window = 16;
  explicit16.q_stride = 16;
  CHECK(metrics::q2n(x, y, cfg) == metrics::q2n(x, y, explicit16));

  Raster nine = rand_raster(9, 16, 16, 93, 0.0, 1.0);
  CHECK_THROWS_AS((void)metrics::q2n(nine, nine, cfg), UnsupportedConfig);
}

TEST_CASE("d_lambda_khan: identity, monotone under growing noise") {
  MetricConfig cfg;
  cfg.q_window = 16;
  cfg.q_stride = 16;
  Raster m = rand_raster(4, 64, 64, 95, 100.0, 1900.0);
  CHECK(std::abs(metrics::d_lambda_khan(m, m, cfg)) < 1e-12);

  Raster noise = rand_raster(4, 64, 64, 96, -1.0, 1.0);
  double prev = -1.0;
  for (double amp : {2.0, 8.0, 32.0, 128.0}) {
    Raster y = m;
    for (size_t i = 0; i < y.values.size(); ++i)
      y.values[i] += amp * noise.values[i];
    const double dl = metrics::d_lambda_khan(y, m, cfg);
    CHECK(dl >= 0.0);
    CHECK(dl <= 1.0);
    CHECK(dl > prev);
    prev = dl;
  }
}

TEST_CASE("d_rho: zero for positive-affine bands, oracle match, support") {
  const i64 h = 32, w = 32;
  Raster pan = rand_raster(1, h, w, 201, 100.0, 1900.0);

  Raster affine = Raster::make(2, h, w);
  for (i64 y = 0; y < h; ++y)
    for (i64 x = 0; x < w; ++x) {
      affine.at(0, y, x) = 0.6 * pan.at(0, y, x) + 40.0;
      affine.at(1, y, x) = 1.3 * pan.at(0, y, x) + 5.0;
    }
  Raster noisy = affine;
  {
    std::mt19937_64 rng(202);
    std::uniform_real_distribution<double> d(-30.0, 30.0);
    for (double& v : noisy.values) v += d(rng);
  }
  auto rho_max = metrics::local_correlation_field(pan, noisy, 16);
  CHECK(metrics::d_rho(affine, pan, rho_max, 4) == 0.0);

  Raster mixed = Raster::make(2, h, w);
  {
    std::mt19937_64 rng(203);
    std::uniform_real_distribution<double> d(-400.0, 400.0);
    for (i64 b = 0; b < 2; ++b)
      for (i64 y = 0; y < h; ++y)
        for (i64 x = 0; x < w; ++x)
          mixed.at(b, y, x) = 0.5 * pan.at(0, y, x) + d(rng);
  }
  auto rho_max6 = metrics::local_correlation_field(pan, noisy, 6);
  const double got = metrics::d_rho(mixed, pan, rho_max6, 4);
  const double want =
      oracles::naive_d_rho(mixed.values, pan.values, rho_max6.values,
                           rho_max6.mask.valid, 2, h, w, 4, 1e-8);
  CHECK(got > 0.0);
  CHECK(std::abs(got - want) < 1e-9);

  Raster flat = Raster::make(2, h, w, 3.0);
  auto dead = metrics::local_correlation_field(pan, flat, 16);
  CHECK_THROWS_AS((void)metrics::d_rho(mixed, pan, dead, 4), InsufficientSupport);
}

TEST_CASE("metric gradients pass finite differences") {
  std::mt19937_64 rng(301);

  SUBCASE("uiqi") {
    Tensor x0 = oracles::rand_tensor({1, 1, 8, 8}, rng, 0.2, 1.8);
    Tensor y0 = oracles::rand_tensor({1, 1, 8, 8}, rng, 0.2, 1.8);
    MetricConfig cfg;
    cfg.q_window = 4;
    cfg.q_stride = 2;
    auto rep = ad::grad_check(
        [&](ad::Tape&, const std::vector<Tensor>& pts) {
          return metrics::uiqi_t(pts[0], pts[1], cfg);
        },
        {x0, y0}, 1e-5, 1e-4, 40);
    INFO(rep.worst);
    CHECK(rep.pass);
  }

  SUBCASE("q2n") {
    Tensor x0 = oracles::rand_tensor({1, 3, 8, 8}, rng, 0.2, 1.8);
    Tensor y0 = oracles::rand_tensor({1, 3, 8, 8}, rng, 0.2, 1.8);
    MetricConfig cfg;
    cfg.q_window = 4;
    cfg.q_stride = 4;
    auto rep = ad::grad_check(
        [&](ad::Tape&, const std::vector<Tensor>& pts) {
          return metrics::q2n_t(pts[0], pts[1], cfg);
        },
        {x0, y0}, 1e-5, 1e-4, 40);
    INFO(rep.worst);
    CHECK(rep.pass);
  }

  SUBCASE("ergas") {
    Tensor y0 = oracles::rand_tensor({1, 3, 8, 8}, rng, 0.5, 1.5);
    Tensor ref = oracles::rand_tensor({1, 3, 8, 8}, rng, 0.5, 1.5);
    auto rep = ad::grad_check(
        [&](ad::Tape&, const std::vector<Tensor>& pts) {
          return metrics::ergas_t(pts[0], ref, 4);
        },
        {y0}, 1e-5, 1e-4, 40);
    INFO(rep.worst);
    CHECK(rep.pass);
  }

  SUBCASE("d_rho") {
    const i64 h = 12, w = 12;
    Raster pan = rand_raster(1, h, w, 302, 0.2, 1.8);
    Raster bands = rand_raster(2, h, w, 303, 0.2, 1.8);
    auto rho_max = metrics::local_correlation_field(pan, bands, 6);
    Tensor pan_t = pan.to_tensor();
    Tensor m0 = oracles::rand_tensor({1, 2, h, w}, rng, 0.2, 1.8);
    auto rep = ad::grad_check(
        [&](ad::Tape&, const std::vector<Tensor>& pts) {
          return metrics::d_rho_t(pts[0], pan_t, rho_max, 4, 1e-8);
        },
        {m0}, 1e-5, 1e-4, 60);
    INFO(rep.worst);
    CHECK(rep.pass);
  }
}
