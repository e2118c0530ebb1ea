#pragma once

// Slow, obviously-correct reference implementations the production code
// is checked against. Everything here is plain loops over plain arrays;
// nothing is shared with the library under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "pansharp/tensor.hpp"

namespace oracles {

using pansharp::ad::i64;
using pansharp::ad::Shape;
using pansharp::ad::Tensor;

inline Tensor rand_tensor(Shape s, std::mt19937_64& rng, double lo = -1.0,
                          double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(static_cast<size_t>(s.numel()));
  for (double& x : v) x = d(rng);
  return Tensor::from_data(s, std::move(v));
}

// Same-size convolution, explicit padding, quadruple loop.
inline std::vector<double> naive_conv2d(const std::vector<double>& x, i64 n,
                                        i64 ci, i64 h, i64 w,
                                        const std::vector<double>& wt, i64 co,
                                        i64 kh, i64 kw, bool replicate) {
  const i64 ph = kh / 2, pw = kw / 2;
  std::vector<double> out(static_cast<size_t>(n * co * h * w), 0.0);
  auto sample = [&](i64 nn, i64 c, i64 y, i64 xq) -> double {
    if (replicate) {
      y = std::clamp<i64>(y, 0, h - 1);
      xq = std::clamp<i64>(xq, 0, w - 1);
    } else if (y < 0 || y >= h || xq < 0 || xq >= w) {
      return 0.0;
    }
    return x[static_cast<size_t>(((nn * ci + c) * h + y) * w + xq)];
  };
  for (i64 nn = 0; nn < n; ++nn)
    for (i64 o = 0; o < co; ++o)
      for (i64 y = 0; y < h; ++y)
        for (i64 xq = 0; xq < w; ++xq) {
          double acc = 0.0;
          for (i64 c = 0; c < ci; ++c)
            for (i64 ky = 0; ky < kh; ++ky)
              for (i64 kx = 0; kx < kw; ++kx)
                acc += wt[static_cast<size_t>(((o * ci + c) * kh + ky) * kw + kx)] *
                       sample(nn, c, y - ph + ky, xq - pw + kx);
          out[static_cast<size_t>(((nn * co + o) * h + y) * w + xq)] = acc;
        }
  return out;
}

inline std::vector<double> naive_windowed_mean(const std::vector<double>& x,
                                               i64 planes, i64 h, i64 w,
                                               i64 win, i64 stride) {
  const i64 oh = (h - win) / stride + 1, ow = (w - win) / stride + 1;
  std::vector<double> out(static_cast<size_t>(planes * oh * ow));
  for (i64 p = 0; p < planes; ++p)
    for (i64 y = 0; y < oh; ++y)
      for (i64 xq = 0; xq < ow; ++xq) {
        double acc = 0.0;
        for (i64 ky = 0; ky < win; ++ky)
          for (i64 kx = 0; kx < win; ++kx)
            acc += x[static_cast<size_t>(
                p * h * w + (y * stride + ky) * w + (xq * stride + kx))];
        out[static_cast<size_t>(p * oh * ow + y * ow + xq)] =
            acc / static_cast<double>(win * win);
      }
  return out;
}

struct NaiveCorr {
  double value = 0.0;
  bool valid = false;
};

inline NaiveCorr naive_corr(const std::vector<double>& x,
                            const std::vector<double>& y, double eps) {
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
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  sxx /= n;
  syy /= n;
  sxy /= n;
  NaiveCorr r;
  r.valid = sxx >= eps && syy >= eps;
  r.value = std::clamp(sxy / std::max(std::sqrt(sxx * syy), eps), -1.0, 1.0);
  return r;
}

struct NaiveField {
  std::vector<double> values;       // (band, row, col), zeros where invalid
  std::vector<std::uint8_t> valid;  // same layout
};

// Pixel (y + sigma/2, x + sigma/2) holds the correlation of the window
// with top-left (y, x).
inline NaiveField naive_local_corr_field(const std::vector<double>& a,
                                         const std::vector<double>& m, i64 bands,
                                         i64 h, i64 w, i64 sigma, double eps) {
  NaiveField f;
  f.values.assign(static_cast<size_t>(bands * h * w), 0.0);
  f.valid.assign(f.values.size(), 0);
  const i64 off = sigma / 2;
  std::vector<double> wa, wm;
  for (i64 b = 0; b < bands; ++b)
    for (i64 y = 0; y + sigma <= h; ++y)
      for (i64 x = 0; x + sigma <= w; ++x) {
        wa.clear();
        wm.clear();
        for (i64 ky = 0; ky < sigma; ++ky)
          for (i64 kx = 0; kx < sigma; ++kx) {
            wa.push_back(a[static_cast<size_t>((y + ky) * w + x + kx)]);
            wm.push_back(
                m[static_cast<size_t>((b * h + y + ky) * w + x + kx)]);
          }
        const NaiveCorr c = naive_corr(wa, wm, eps);
        const size_t dst =
            static_cast<size_t>((b * h + y + off) * w + x + off);
        f.values[dst] = c.value;
        f.valid[dst] = c.valid ? 1 : 0;
      }
  return f;
}

inline double naive_uiqi(const std::vector<double>& x,
                         const std::vector<double>& y, i64 planes, i64 h, i64 w,
                         i64 win, i64 stride, double eps) {
  double acc = 0.0;
  i64 count = 0;
  for (i64 p = 0; p < planes; ++p)
    for (i64 oy = 0; oy + win <= h; oy += stride)
      for (i64 ox = 0; ox + win <= w; ox += stride) {
        const double n = static_cast<double>(win * win);
        double mx = 0.0, my = 0.0;
        for (i64 ky = 0; ky < win; ++ky)
          for (i64 kx = 0; kx < win; ++kx) {
            mx += x[static_cast<size_t>((p * h + oy + ky) * w + ox + kx)];
            my += y[static_cast<size_t>((p * h + oy + ky) * w + ox + kx)];
          }
        mx /= n;
        my /= n;
        double vx = 0.0, vy = 0.0, cov = 0.0;
        for (i64 ky = 0; ky < win; ++ky)
          for (i64 kx = 0; kx < win; ++kx) {
            const double dx =
                x[static_cast<size_t>((p * h + oy + ky) * w + ox + kx)] - mx;
            const double dy =
                y[static_cast<size_t>((p * h + oy + ky) * w + ox + kx)] - my;
            vx += dx * dx;
            vy += dy * dy;
            cov += dx * dy;
          }
        vx /= n;
        vy /= n;
        cov /= n;
        const double den = (vx + vy) * (mx * mx + my * my);
        acc += 4.0 * cov * mx * my / std::max(den, eps);
        ++count;
      }
  return acc / static_cast<double>(count);
}

inline double naive_ergas(const std::vector<double>& y,
                          const std::vector<double>& x, i64 bands, i64 h, i64 w,
                          int ratio) {
  const i64 plane = h * w;
  double acc = 0.0;
  for (i64 b = 0; b < bands; ++b) {
    double mu = 0.0, mse = 0.0;
    for (i64 i = 0; i < plane; ++i) mu += x[static_cast<size_t>(b * plane + i)];
    mu /= static_cast<double>(plane);
    for (i64 i = 0; i < plane; ++i) {
      const double d = y[static_cast<size_t>(b * plane + i)] -
                       x[static_cast<size_t>(b * plane + i)];
      mse += d * d;
    }
    mse /= static_cast<double>(plane);
    acc += mse / (mu * mu);
  }
  return 100.0 / ratio * std::sqrt(acc / static_cast<double>(bands));
}

// Cayley-Dickson product on coefficient vectors (dim a power of two):
// (a,b)(c,d) = (ac - conj(d) b, d a + b conj(c)).
inline std::vector<double> cd_conj(std::vector<double> v) {
  for (size_t i = 1; i < v.size(); ++i) v[i] = -v[i];
  return v;
}

inline std::vector<double> cd_mul(const std::vector<double>& a,
                                  const std::vector<double>& b) {
  const size_t n = a.size();
  if (n == 1) return {a[0] * b[0]};
  const size_t h = n / 2;
  const std::vector<double> p(a.begin(), a.begin() + h), q(a.begin() + h, a.end());
  const std::vector<double> r(b.begin(), b.begin() + h), s(b.begin() + h, b.end());
  const std::vector<double> lo_a = cd_mul(p, r), lo_b = cd_mul(cd_conj(s), q);
  const std::vector<double> hi_a = cd_mul(s, p), hi_b = cd_mul(q, cd_conj(r));
  std::vector<double> out(n, 0.0);
  for (size_t i = 0; i < h; ++i) {
    out[i] = lo_a[i] - lo_b[i];
    out[h + i] = hi_a[i] + hi_b[i];
  }
  return out;
}

// Per window: band vectors as hypercomplex numbers (zero-padded to a
// power of two), covariance by direct averaging of products.
inline double naive_q2n(const std::vector<double>& x,
                        const std::vector<double>& y, i64 bands, i64 h, i64 w,
                        i64 win, i64 stride, double eps) {
  size_t dim = 1;
  while (dim < static_cast<size_t>(bands)) dim *= 2;
  auto modulus = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double c : v) s += c * c;
    return std::sqrt(s);
  };
  double acc = 0.0;
  i64 count = 0;
  for (i64 oy = 0; oy + win <= h; oy += stride)
    for (i64 ox = 0; ox + win <= w; ox += stride) {
      const double n = static_cast<double>(win * win);
      std::vector<double> muz(dim, 0.0), muw(dim, 0.0);
      for (i64 b = 0; b < bands; ++b)
        for (i64 ky = 0; ky < win; ++ky)
          for (i64 kx = 0; kx < win; ++kx) {
            muz[static_cast<size_t>(b)] +=
                x[static_cast<size_t>((b * h + oy + ky) * w + ox + kx)];
            muw[static_cast<size_t>(b)] +=
                y[static_cast<size_t>((b * h + oy + ky) * w + ox + kx)];
          }
      for (size_t k = 0; k < dim; ++k) {
        muz[k] /= n;
        muw[k] /= n;
      }
      std::vector<double> sigma_zw(dim, 0.0);
      double var_z = 0.0, var_w = 0.0;
      for (i64 ky = 0; ky < win; ++ky)
        for (i64 kx = 0; kx < win; ++kx) {
          std::vector<double> dz(dim, 0.0), dw(dim, 0.0);
          for (i64 b = 0; b < bands; ++b) {
            dz[static_cast<size_t>(b)] =
                x[static_cast<size_t>((b * h + oy + ky) * w + ox + kx)] -
                muz[static_cast<size_t>(b)];
            dw[static_cast<size_t>(b)] =
                y[static_cast<size_t>((b * h + oy + ky) * w + ox + kx)] -
                muw[static_cast<size_t>(b)];
          }
          const std::vector<double> prod = cd_mul(dz, cd_conj(dw));
          for (size_t k = 0; k < dim; ++k) sigma_zw[k] += prod[k];
          for (size_t k = 0; k < dim; ++k) {
            var_z += dz[k] * dz[k];
            var_w += dw[k] * dw[k];
          }
        }
      for (size_t k = 0; k < dim; ++k) sigma_zw[k] /= n;
      var_z /= n;
      var_w /= n;
      const double mz = modulus(muz), mw = modulus(muw);
      const double den = (var_z + var_w) * (mz * mz + mw * mw);
      acc += 4.0 * modulus(sigma_zw) * mz * mw / std::max(den, eps);
      ++count;
    }
  return acc / static_cast<double>(count);
}

// Masked average over anchors of (1 - rho) where rho < rho_max; the
// denominator counts every jointly valid anchor.
inline double naive_d_rho(const std::vector<double>& mhat,
                          const std::vector<double>& pan,
                          const std::vector<double>& rmax_values,
                          const std::vector<std::uint8_t>& rmax_valid, i64 bands,
                          i64 h, i64 w, i64 sigma, double eps) {
  const i64 off = sigma / 2;
  double acc = 0.0;
  i64 count = 0;
  std::vector<double> wp, wm;
  for (i64 b = 0; b < bands; ++b)
    for (i64 y = 0; y + sigma <= h; ++y)
      for (i64 x = 0; x + sigma <= w; ++x) {
        wp.clear();
        wm.clear();
        for (i64 ky = 0; ky < sigma; ++ky)
          for (i64 kx = 0; kx < sigma; ++kx) {
            wp.push_back(pan[static_cast<size_t>((y + ky) * w + x + kx)]);
            wm.push_back(
                mhat[static_cast<size_t>((b * h + y + ky) * w + x + kx)]);
          }
        const NaiveCorr c = naive_corr(wp, wm, eps);
        const size_t px = static_cast<size_t>((b * h + y + off) * w + x + off);
        if (!c.valid || rmax_valid[px] == 0) continue;
        ++count;
        if (c.value < rmax_values[px]) acc += 1.0 - c.value;
      }
  return acc / static_cast<double>(count);
}

// y(r, c) = x(r + dy, c + dx), bilinear, reads clamped to the border.
inline std::vector<double> naive_bilinear_shift(const std::vector<double>& x,
                                                i64 planes, i64 h, i64 w,
                                                double dx, double dy) {
  std::vector<double> out(static_cast<size_t>(planes * h * w));
  auto rd = [&](i64 p, i64 y, i64 xq) {
    y = std::clamp<i64>(y, 0, h - 1);
    xq = std::clamp<i64>(xq, 0, w - 1);
    return x[static_cast<size_t>(p * h * w + y * w + xq)];
  };
  for (i64 p = 0; p < planes; ++p)
    for (i64 y = 0; y < h; ++y)
      for (i64 xq = 0; xq < w; ++xq) {
        const double sy = y + dy, sx = xq + dx;
        const double fy = std::floor(sy), fx = std::floor(sx);
        const double ry = sy - fy, rx = sx - fx;
        const i64 y0 = static_cast<i64>(fy), x0 = static_cast<i64>(fx);
        out[static_cast<size_t>(p * h * w + y * w + xq)] =
            (1 - ry) * (1 - rx) * rd(p, y0, x0) + (1 - ry) * rx * rd(p, y0, x0 + 1) +
            ry * (1 - rx) * rd(p, y0 + 1, x0) + ry * rx * rd(p, y0 + 1, x0 + 1);
      }
  return out;
}

// Per-band mean windowed correlation between a bilinear-shifted single
// plane and each band of m, over anchors keeping `margin` pixels from
// every border; flat windows are skipped. NaN when nothing is scorable.
inline std::vector<double> naive_shift_scores(const std::vector<double>& p,
                                              const std::vector<double>& m,
                                              i64 bands, i64 h, i64 w, i64 sigma,
                                              i64 margin, double eps, double dx,
                                              double dy) {
  const std::vector<double> ps = naive_bilinear_shift(p, 1, h, w, dx, dy);
  std::vector<double> out(static_cast<size_t>(bands),
                          std::numeric_limits<double>::quiet_NaN());
  std::vector<double> wp, wm;
  for (i64 b = 0; b < bands; ++b) {
    double acc = 0.0;
    i64 cnt = 0;
    for (i64 y = margin; y + sigma + margin <= h; ++y)
      for (i64 x = margin; x + sigma + margin <= w; ++x) {
        wp.clear();
        wm.clear();
        for (i64 ky = 0; ky < sigma; ++ky)
          for (i64 kx = 0; kx < sigma; ++kx) {
            wp.push_back(ps[static_cast<size_t>((y + ky) * w + x + kx)]);
            wm.push_back(m[static_cast<size_t>((b * h + y + ky) * w + x + kx)]);
          }
        const NaiveCorr c = naive_corr(wp, wm, eps);
        if (!c.valid) continue;
        acc += c.value;
        ++cnt;
      }
    if (cnt > 0) out[static_cast<size_t>(b)] = acc / static_cast<double>(cnt);
  }
  return out;
}

struct NaiveEigen {
  std::vector<double> values;               // descending
  std::vector<std::vector<double>> vectors;  // unit rows, same order
};

// Cyclic Jacobi rotations on a symmetric matrix until every
// off-diagonal entry is below 1e-14 times the largest diagonal scale.
inline NaiveEigen naive_symmetric_eigen(std::vector<double> a, i64 d) {
  std::vector<double> v(static_cast<size_t>(d * d), 0.0);
  for (i64 i = 0; i < d; ++i) v[static_cast<size_t>(i * d + i)] = 1.0;
  auto at = [&](std::vector<double>& m, i64 r, i64 c) -> double& {
    return m[static_cast<size_t>(r * d + c)];
  };
  double scale = 0.0;
  for (i64 i = 0; i < d; ++i) scale = std::max(scale, std::abs(at(a, i, i)));
  const double tol = 1e-14 * std::max(scale, 1.0);
  for (int sweep = 0; sweep < 200; ++sweep) {
    double off = 0.0;
    for (i64 p = 0; p < d; ++p)
      for (i64 q = p + 1; q < d; ++q) off = std::max(off, std::abs(at(a, p, q)));
    if (off < tol) break;
    for (i64 p = 0; p < d; ++p)
      for (i64 q = p + 1; q < d; ++q) {
        const double apq = at(a, p, q);
        if (std::abs(apq) < tol * 1e-2) continue;
        const double theta = (at(a, q, q) - at(a, p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (i64 i = 0; i < d; ++i) {
          const double aip = at(a, i, p), aiq = at(a, i, q);
          at(a, i, p) = c * aip - s * aiq;
          at(a, i, q) = s * aip + c * aiq;
        }
        for (i64 i = 0; i < d; ++i) {
          const double api = at(a, p, i), aqi = at(a, q, i);
          at(a, p, i) = c * api - s * aqi;
          at(a, q, i) = s * api + c * aqi;
        }
        for (i64 i = 0; i < d; ++i) {
          const double vip = at(v, i, p), viq = at(v, i, q);
          at(v, i, p) = c * vip - s * viq;
          at(v, i, q) = s * vip + c * viq;
        }
      }
  }
  std::vector<i64> order(static_cast<size_t>(d));
  for (i64 i = 0; i < d; ++i) order[static_cast<size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](i64 x, i64 y) {
    return at(a, x, x) > at(a, y, y);
  });
  NaiveEigen out;
  for (i64 r = 0; r < d; ++r) {
    const i64 col = order[static_cast<size_t>(r)];
    out.values.push_back(at(a, col, col));
    std::vector<double> vec(static_cast<size_t>(d));
    for (i64 i = 0; i < d; ++i) vec[static_cast<size_t>(i)] = at(v, i, col);
    out.vectors.push_back(std::move(vec));
  }
  return out;
}

// Mean-centered population covariance of row vectors.
inline std::vector<double> naive_covariance(
    const std::vector<std::vector<double>>& rows, i64 d,
    std::vector<double>* mean_out = nullptr) {
  const double n = static_cast<double>(rows.size());
  std::vector<double> mu(static_cast<size_t>(d), 0.0);
  for (const auto& r : rows)
    for (i64 j = 0; j < d; ++j) mu[static_cast<size_t>(j)] += r[static_cast<size_t>(j)];
  for (double& m : mu) m /= n;
  std::vector<double> c(static_cast<size_t>(d * d), 0.0);
  for (const auto& r : rows)
    for (i64 i = 0; i < d; ++i)
      for (i64 j = 0; j < d; ++j)
        c[static_cast<size_t>(i * d + j)] += (r[static_cast<size_t>(i)] - mu[static_cast<size_t>(i)]) *
                                             (r[static_cast<size_t>(j)] - mu[static_cast<size_t>(j)]);
  for (double& x : c) x /= n;
  if (mean_out) *mean_out = std::move(mu);
  return c;
}

}  // namespace oracles
