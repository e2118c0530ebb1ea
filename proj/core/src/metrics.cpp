#include "pansharp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pansharp/errors.hpp"
#include "pansharp/ops.hpp"

namespace pansharp::metrics {

using ad::Tensor;

void MetricConfig::validate() const {
  if (q_window < 2) throw ContractViolation("MetricConfig: q_window must be >= 2");
  if (q_stride < 1) throw ContractViolation("MetricConfig: q_stride must be >= 1");
  if (ratio < 1) throw ContractViolation("MetricConfig: ratio must be >= 1");
  if (sigma < 2) throw ContractViolation("MetricConfig: sigma must be >= 2");
  if (!(eps > 0.0)) throw ContractViolation("MetricConfig: eps must be > 0");
}

CorrResult corrcoef(std::span<const double> x, std::span<const double> y,
                    double eps) {
  if (x.size() != y.size())
    throw ContractViolation("corrcoef: size mismatch");
  if (x.size() < 2) throw ContractViolation("corrcoef: need at least 2 samples");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  sxx /= n;
  syy /= n;
  sxy /= n;
  CorrResult r;
  r.valid = sxx >= eps && syy >= eps;
  const double denom = std::max(std::sqrt(sxx * syy), eps);
  r.value = std::clamp(sxy / denom, -1.0, 1.0);
  return r;
}

namespace {

Tensor band(const Tensor& x, i64 b) {
  const auto& s = x.shape();
  return ad::crop(x, b, b + 1, 0, s.h, 0, s.w);
}

// Constant shift that improves the conditioning of the raw-moment
// variance formulas; correlation is invariant to it, so treating the
// shift as a constant leaves gradients unchanged.
Tensor center_per_channel(const Tensor& x) {
  const auto& s = x.shape();
  const i64 plane = s.h * s.w;
  std::vector<double> means(static_cast<size_t>(s.n * s.c), 0.0);
  const double* d = x.data().data();
  for (i64 nc = 0; nc < s.n * s.c; ++nc) {
    double acc = 0.0;
    for (i64 i = 0; i < plane; ++i) acc += d[nc * plane + i];
    means[static_cast<size_t>(nc)] = acc / static_cast<double>(plane);
  }
  return ad::sub(x, Tensor::from_data({s.n, s.c, 1, 1}, means));
}

Tensor not_less(const Tensor& a, double threshold) {
  return ad::sub(Tensor::scalar(1.0), ad::less_mask(a, Tensor::scalar(threshold)));
}

}  // namespace

LocalCorr local_corr_anchor(const Tensor& p, const Tensor& m, i64 sigma,
                            double eps) {
  const auto& ps = p.shape();
  const auto& ms = m.shape();
  if (ps.n != 1 || ms.n != 1 || ps.c != 1)
    throw ContractViolation("local_corr_anchor: reference must be (1,1,h,w)");
  if (ps.h != ms.h || ps.w != ms.w)
    throw ContractViolation("local_corr_anchor: spatial shapes differ");
  if (sigma < 2 || sigma > std::min(ps.h, ps.w))
    throw ContractViolation("local_corr_anchor: window does not fit the image");

  Tensor pc = center_per_channel(p);
  Tensor mc = center_per_channel(m);
  Tensor mp = ad::windowed_mean(pc, sigma, 1);
  Tensor mm = ad::windowed_mean(mc, sigma, 1);
  Tensor varp = ad::sub(ad::windowed_mean(ad::square(pc), sigma, 1), ad::square(mp));
  Tensor varm = ad::sub(ad::windowed_mean(ad::square(mc), sigma, 1), ad::square(mm));
  Tensor cov = ad::sub(ad::windowed_mean(ad::mul(pc, mc), sigma, 1), ad::mul(mp, mm));

  Tensor valid = ad::mul(not_less(varp.detached(), eps), not_less(varm.detached(), eps));
  Tensor denom = ad::clamp_min(ad::sqrt_(ad::clamp_min(ad::mul(varp, varm), 0.0)), eps);
  Tensor rho = ad::clamp(ad::div(cov, denom), -1.0, 1.0);
  return {rho, valid};
}

CorrelationField local_correlation_field(const Raster& a, const Raster& bands,
                                         i64 sigma, double eps) {
  a.validate("local_correlation_field: reference");
  bands.validate("local_correlation_field: bands");
  if (a.bands != 1)
    throw ContractViolation("local_correlation_field: reference must have 1 band");
  if (a.height != bands.height || a.width != bands.width)
    throw ContractViolation("local_correlation_field: shape mismatch");
  if (sigma < 2 || sigma > std::min(a.height, a.width))
    throw ContractViolation("local_correlation_field: window does not fit");

  LocalCorr lc = local_corr_anchor(a.to_tensor(), bands.to_tensor(), sigma, eps);
  const auto& rs = lc.rho.shape();

  CorrelationField f;
  f.bands = bands.bands;
  f.height = bands.height;
  f.width = bands.width;
  f.window = sigma;
  f.values.assign(static_cast<size_t>(f.bands * f.height * f.width), 0.0);
  f.mask = Mask::full(f.bands, f.height, f.width, false);

  const i64 off = sigma / 2;
  const double* rho = lc.rho.data().data();
  const double* val = lc.valid.data().data();
  for (i64 b = 0; b < f.bands; ++b)
    for (i64 y = 0; y < rs.h; ++y)
      for (i64 x = 0; x < rs.w; ++x) {
        const size_t src = static_cast<size_t>((b * rs.h + y) * rs.w + x);
        const size_t dst =
            static_cast<size_t>((b * f.height + y + off) * f.width + x + off);
        f.values[dst] = rho[src];
        f.mask.valid[dst] = val[src] > 0.5 ? 1 : 0;
      }
  return f;
}

namespace {

struct BlockGeom {
  i64 win;
  i64 stride;
};

BlockGeom effective_blocks(const MetricConfig& cfg, i64 h, i64 w) {
  cfg.validate();
  const i64 win = std::min({cfg.q_window, h, w});
  i64 stride = cfg.q_stride == cfg.q_window ? win : std::min(cfg.q_stride, win);
  return {win, stride};
}

}  // namespace

Tensor uiqi_t(const Tensor& x, const Tensor& y, const MetricConfig& cfg) {
  const auto& xs = x.shape();
  if (!(xs == y.shape())) throw ContractViolation("uiqi: shape mismatch");
  const auto [win, stride] = effective_blocks(cfg, xs.h, xs.w);

  Tensor mx = ad::windowed_mean(x, win, stride);
  Tensor my = ad::windowed_mean(y, win, stride);
  Tensor vx = ad::sub(ad::windowed_mean(ad::square(x), win, stride), ad::square(mx));
  Tensor vy = ad::sub(ad::windowed_mean(ad::square(y), win, stride), ad::square(my));
  Tensor cov = ad::sub(ad::windowed_mean(ad::mul(x, y), win, stride), ad::mul(mx, my));

  Tensor num = ad::scale(ad::mul(cov, ad::mul(mx, my)), 4.0);
  Tensor den = ad::mul(ad::add(vx, vy), ad::add(ad::square(mx), ad::square(my)));
  return ad::mean(ad::div(num, ad::clamp_min(den, cfg.eps)));
}

namespace {

// e_i * e_j at dimension n via (a,b)(c,d) = (ac - conj(d) b, d a + b conj(c)),
// carried out on (index, sign) pairs. Integer arithmetic on purpose: an
// equivalent float recursion here was miscompiled by gcc 11 at
// -O3 -march=native (signs dropped in the masked extraction loop).
CDEntry basis_mul(int n, int i, int j) {
  if (n == 1) return {0, 1};
  const int h = n / 2;
  if (i < h && j < h) return basis_mul(h, i, j);
  if (i < h) {  // (e_i, 0)(0, e_j') = (0, e_j' e_i)
    const CDEntry e = basis_mul(h, j - h, i);
    return {h + e.k, e.sign};
  }
  if (j < h) {  // (0, e_i')(e_j, 0) = (0, e_i' conj(e_j))
    const CDEntry e = basis_mul(h, i - h, j);
    return {h + e.k, j == 0 ? e.sign : -e.sign};
  }
  // (0, e_i')(0, e_j') = (-conj(e_j') e_i', 0)
  const CDEntry e = basis_mul(h, j - h, i - h);
  return {e.k, j - h == 0 ? -e.sign : e.sign};
}

}  // namespace

std::vector<std::vector<CDEntry>> cayley_dickson_table(int dim) {
  if (dim != 1 && dim != 2 && dim != 4 && dim != 8)
    throw UnsupportedConfig("cayley_dickson_table: dim must be 1, 2, 4, or 8");
  std::vector<std::vector<CDEntry>> table(
      static_cast<size_t>(dim), std::vector<CDEntry>(static_cast<size_t>(dim)));
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      table[static_cast<size_t>(i)][static_cast<size_t>(j)] = basis_mul(dim, i, j);
  return table;
}

Tensor q2n_t(const Tensor& x, const Tensor& y, const MetricConfig& cfg) {
  const auto& xs = x.shape();
  if (!(xs == y.shape())) throw ContractViolation("q2n: shape mismatch");
  if (xs.n != 1) throw ContractViolation("q2n: batch dim must be 1");
  const i64 B = xs.c;
  if (B > 8) throw UnsupportedConfig("q2n: more than 8 bands");
  i64 dim = 1;
  while (dim < B) dim *= 2;
  const auto table = cayley_dickson_table(static_cast<int>(dim));
  const auto [win, stride] = effective_blocks(cfg, xs.h, xs.w);

  // Per-band window moments; padded bands (B..dim) are zero and drop out.
  std::vector<Tensor> mx(static_cast<size_t>(B)), my(static_cast<size_t>(B));
  std::vector<Tensor> xb(static_cast<size_t>(B)), yb(static_cast<size_t>(B));
  for (i64 b = 0; b < B; ++b) {
    xb[static_cast<size_t>(b)] = band(x, b);
    yb[static_cast<size_t>(b)] = band(y, b);
    mx[static_cast<size_t>(b)] = ad::windowed_mean(xb[static_cast<size_t>(b)], win, stride);
    my[static_cast<size_t>(b)] = ad::windowed_mean(yb[static_cast<size_t>(b)], win, stride);
  }

  auto cov = [&](i64 i, i64 j) {
    Tensor raw = ad::windowed_mean(
        ad::mul(xb[static_cast<size_t>(i)], yb[static_cast<size_t>(j)]), win, stride);
    return ad::sub(raw, ad::mul(mx[static_cast<size_t>(i)], my[static_cast<size_t>(j)]));
  };

  Tensor sz2, sw2, a2, b2;
  for (i64 b = 0; b < B; ++b) {
    Tensor vx = ad::sub(
        ad::windowed_mean(ad::square(xb[static_cast<size_t>(b)]), win, stride),
        ad::square(mx[static_cast<size_t>(b)]));
    Tensor vy = ad::sub(
        ad::windowed_mean(ad::square(yb[static_cast<size_t>(b)]), win, stride),
        ad::square(my[static_cast<size_t>(b)]));
    Tensor ma = ad::square(mx[static_cast<size_t>(b)]);
    Tensor mb = ad::square(my[static_cast<size_t>(b)]);
    sz2 = b == 0 ? vx : ad::add(sz2, vx);
    sw2 = b == 0 ? vy : ad::add(sw2, vy);
    a2 = b == 0 ? ma : ad::add(a2, ma);
    b2 = b == 0 ? mb : ad::add(b2, mb);
  }

  // sigma_zw components: z conj(w) expanded over band covariances.
  // coef(i,j) from e_i * conj(e_j); off-diagonal (i,j)/(j,i) terms are
  // summed as adjacent pairs so they cancel exactly when x == y.
  auto coef = [&](i64 i, i64 j) {
    const CDEntry e = table[static_cast<size_t>(i)][static_cast<size_t>(j)];
    return CDEntry{e.k, j == 0 ? e.sign : -e.sign};
  };
  std::vector<Tensor> comp(static_cast<size_t>(dim));
  std::vector<bool> has(static_cast<size_t>(dim), false);
  auto accum = [&](int k, const Tensor& t) {
    if (!has[static_cast<size_t>(k)]) {
      comp[static_cast<size_t>(k)] = t;
      has[static_cast<size_t>(k)] = true;
    } else {
      comp[static_cast<size_t>(k)] = ad::add(comp[static_cast<size_t>(k)], t);
    }
  };
  for (i64 i = 0; i < B; ++i) {
    const CDEntry d = coef(i, i);
    accum(d.k, ad::scale(cov(i, i), static_cast<double>(d.sign)));
  }
  for (i64 i = 0; i < B; ++i)
    for (i64 j = i + 1; j < B; ++j) {
      const CDEntry dij = coef(i, j);
      const CDEntry dji = coef(j, i);
      Tensor pair = ad::add(ad::scale(cov(i, j), static_cast<double>(dij.sign)),
                            ad::scale(cov(j, i), static_cast<double>(dji.sign)));
      if (dij.k != dji.k)
        throw NumericFailure("q2n: inconsistent basis table");
      accum(dij.k, pair);
    }

  Tensor s2;
  bool first = true;
  for (i64 k = 0; k < dim; ++k) {
    if (!has[static_cast<size_t>(k)]) continue;
    Tensor sq = ad::square(comp[static_cast<size_t>(k)]);
    s2 = first ? sq : ad::add(s2, sq);
    first = false;
  }
  Tensor mod_s = ad::sqrt_(ad::clamp_min(s2, 0.0));
  Tensor mod_mx = ad::sqrt_(a2);
  Tensor mod_my = ad::sqrt_(b2);

  Tensor num = ad::scale(ad::mul(mod_s, ad::mul(mod_mx, mod_my)), 4.0);
  Tensor den = ad::mul(ad::add(sz2, sw2), ad::add(a2, b2));
  return ad::mean(ad::div(num, ad::clamp_min(den, cfg.eps)));
}

Tensor ergas_t(const Tensor& y, const Tensor& xref, int ratio) {
  const auto& ys = y.shape();
  if (!(ys == xref.shape())) throw ContractViolation("ergas: shape mismatch");
  if (ys.n != 1) throw ContractViolation("ergas: batch dim must be 1");
  if (ratio < 1) throw ContractViolation("ergas: ratio must be >= 1");

  const i64 B = ys.c;
  const i64 plane = ys.h * ys.w;
  const double* ref = xref.data().data();
  std::vector<i64> degenerate;
  std::vector<double> mu(static_cast<size_t>(B), 0.0);
  for (i64 b = 0; b < B; ++b) {
    double acc = 0.0;
    for (i64 i = 0; i < plane; ++i) acc += ref[b * plane + i];
    mu[static_cast<size_t>(b)] = acc / static_cast<double>(plane);
    if (mu[static_cast<size_t>(b)] == 0.0) degenerate.push_back(b);
  }
  if (!degenerate.empty()) {
    std::string msg = "ergas: zero-mean reference band(s):";
    for (i64 b : degenerate) msg += " " + std::to_string(b);
    throw NumericDomainError(msg);
  }

  Tensor acc;
  for (i64 b = 0; b < B; ++b) {
    Tensor mse = ad::mean(ad::square(ad::sub(band(y, b), band(xref, b))));
    Tensor rel = ad::scale(mse, 1.0 / (mu[static_cast<size_t>(b)] * mu[static_cast<size_t>(b)]));
    acc = b == 0 ? rel : ad::add(acc, rel);
  }
  return ad::scale(ad::sqrt_(ad::scale(acc, 1.0 / static_cast<double>(B))),
                   100.0 / static_cast<double>(ratio));
}

Tensor d_lambda_khan_t(const Tensor& y_down, const Tensor& m, const MetricConfig& cfg) {
  return ad::sub(Tensor::scalar(1.0), q2n_t(y_down, m, cfg));
}

Tensor d_rho_t(const Tensor& mhat, const Tensor& pan,
               const CorrelationField& rho_max, i64 sigma, double eps,
               DRhoStats* stats) {
  const auto& ms = mhat.shape();
  const auto& ps = pan.shape();
  if (ms.n != 1 || ps.n != 1 || ps.c != 1)
    throw ContractViolation("d_rho: expected (1,B,h,w) and (1,1,h,w)");
  if (ms.h != ps.h || ms.w != ps.w) throw ContractViolation("d_rho: shape mismatch");
  if (rho_max.bands != ms.c || rho_max.height != ms.h || rho_max.width != ms.w)
    throw ContractViolation("d_rho: rho_max field shape mismatch");

  LocalCorr lc = local_corr_anchor(pan, mhat, sigma, eps);
  const auto& rs = lc.rho.shape();
  const i64 off = sigma / 2;

  std::vector<double> rmax(static_cast<size_t>(rs.c * rs.h * rs.w), 0.0);
  std::vector<double> rvalid(rmax.size(), 0.0);
  for (i64 b = 0; b < rs.c; ++b)
    for (i64 y = 0; y < rs.h; ++y)
      for (i64 x = 0; x < rs.w; ++x) {
        const size_t idx = static_cast<size_t>((b * rs.h + y) * rs.w + x);
        rmax[idx] = rho_max.at(b, y + off, x + off);
        rvalid[idx] = rho_max.mask.at(b, y + off, x + off) ? 1.0 : 0.0;
      }
  Tensor rmax_t = Tensor::from_data(rs, rmax);
  Tensor rvalid_t = Tensor::from_data(rs, rvalid);

  Tensor joint = ad::mul(lc.valid, rvalid_t);
  Tensor u = ad::less_mask(lc.rho, rmax_t);
  Tensor active = ad::mul(u, joint);

  double count = 0.0;
  for (double v : joint.data()) count += v;
  if (count == 0.0)
    throw InsufficientSupport("d_rho: no jointly valid windows");
  if (stats) {
    stats->support = static_cast<i64>(count);
    double on = 0.0;
    for (double v : active.data()) on += v;
    stats->active = static_cast<i64>(on);
  }

  Tensor numer = ad::sum(ad::mul(ad::sub(Tensor::scalar(1.0), lc.rho), active));
  return ad::scale(numer, 1.0 / count);
}

double uiqi(const Raster& x, const Raster& y, const MetricConfig& cfg) {
  x.validate("uiqi: x");
  y.validate("uiqi: y");
  return uiqi_t(x.to_tensor(), y.to_tensor(), cfg).item();
}

double q2n(const Raster& x, const Raster& y, const MetricConfig& cfg) {
  x.validate("q2n: x");
  y.validate("q2n: y");
  return q2n_t(x.to_tensor(), y.to_tensor(), cfg).item();
}

double ergas(const Raster& y, const Raster& xref, int ratio) {
  y.validate("ergas: y");
  xref.validate("ergas: reference");
  return ergas_t(y.to_tensor(), xref.to_tensor(), ratio).item();
}

double d_lambda_khan(const Raster& y_down, const Raster& m, const MetricConfig& cfg) {
  y_down.validate("d_lambda_khan: y");
  m.validate("d_lambda_khan: m");
  return d_lambda_khan_t(y_down.to_tensor(), m.to_tensor(), cfg).item();
}

double d_rho(const Raster& mhat, const Raster& pan, const CorrelationField& rho_max,
             i64 sigma, double eps) {
  mhat.validate("d_rho: mhat");
  pan.validate("d_rho: pan");
  return d_rho_t(mhat.to_tensor(), pan.to_tensor(), rho_max, sigma, eps).item();
}

}  // namespace pansharp::metrics
