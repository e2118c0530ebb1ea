#include <algorithm>
#include <cstring>

#include "pansharp/ops.hpp"

namespace pansharp::ad {

namespace {

// Runtime-dispatched SIMD variants of the three hot kernels; the
// baseline clone keeps the build portable.
#if defined(__x86_64__) && defined(__GNUC__) && !defined(__clang__)
#define PANSHARP_HOT_CLONES \
  __attribute__((target_clones("avx512f", "avx2", "default")))
#else
#define PANSHARP_HOT_CLONES
#endif

// out += conv_valid(in, w) for one (kh x kw) kernel; in is (in_h x in_w),
// out is (out_h x out_w) with in_h = out_h + kh - 1 etc.
PANSHARP_HOT_CLONES
void acc_plane_3x3(const double* in, i64 in_w, double* out, i64 out_h,
                   i64 out_w, const double* w) {
  const double w00 = w[0], w01 = w[1], w02 = w[2];
  const double w10 = w[3], w11 = w[4], w12 = w[5];
  const double w20 = w[6], w21 = w[7], w22 = w[8];
  for (i64 y = 0; y < out_h; ++y) {
    const double* r0 = in + (y + 0) * in_w;
    const double* r1 = in + (y + 1) * in_w;
    const double* r2 = in + (y + 2) * in_w;
    double* o = out + y * out_w;
    for (i64 x = 0; x < out_w; ++x) {
      const double t0 = w00 * r0[x] + w01 * r0[x + 1] + w02 * r0[x + 2];
      const double t1 = w10 * r1[x] + w11 * r1[x + 1] + w12 * r1[x + 2];
      const double t2 = w20 * r2[x] + w21 * r2[x + 1] + w22 * r2[x + 2];
      o[x] += (t0 + t1) + t2;
    }
  }
}

PANSHARP_HOT_CLONES
void acc_plane_generic(const double* in, i64 in_w, double* out, i64 out_h,
                       i64 out_w, const double* w, i64 kh, i64 kw) {
  for (i64 ky = 0; ky < kh; ++ky)
    for (i64 kx = 0; kx < kw; ++kx) {
      const double wv = w[ky * kw + kx];
      if (wv == 0.0) continue;
      for (i64 y = 0; y < out_h; ++y) {
        const double* r = in + (y + ky) * in_w + kx;
        double* o = out + y * out_w;
        for (i64 x = 0; x < out_w; ++x) o[x] += wv * r[x];
      }
    }
}

void acc_plane(const double* in, i64 in_w, double* out, i64 out_h, i64 out_w,
               const double* w, i64 kh, i64 kw) {
  if (kh == 3 && kw == 3)
    acc_plane_3x3(in, in_w, out, out_h, out_w, w);
  else
    acc_plane_generic(in, in_w, out, out_h, out_w, w, kh, kw);
}

// All nine 3x3 lag correlations in one sweep over the planes; g and the
// three padded rows stay cache-hot and the chains are independent.
PANSHARP_HOT_CLONES
void corr_3x3(const double* pp, i64 pw2, const double* gp, i64 h, i64 w,
              double* acc9) {
  double a00 = 0, a01 = 0, a02 = 0, a10 = 0, a11 = 0, a12 = 0, a20 = 0,
         a21 = 0, a22 = 0;
  for (i64 y = 0; y < h; ++y) {
    const double* gr = gp + y * w;
    const double* r0 = pp + y * pw2;
    const double* r1 = pp + (y + 1) * pw2;
    const double* r2 = pp + (y + 2) * pw2;
    for (i64 x = 0; x < w; ++x) {
      const double gv = gr[x];
      a00 += gv * r0[x];
      a01 += gv * r0[x + 1];
      a02 += gv * r0[x + 2];
      a10 += gv * r1[x];
      a11 += gv * r1[x + 1];
      a12 += gv * r1[x + 2];
      a20 += gv * r2[x];
      a21 += gv * r2[x + 1];
      a22 += gv * r2[x + 2];
    }
  }
  acc9[0] += a00;
  acc9[1] += a01;
  acc9[2] += a02;
  acc9[3] += a10;
  acc9[4] += a11;
  acc9[5] += a12;
  acc9[6] += a20;
  acc9[7] += a21;
  acc9[8] += a22;
}

// Eight partial sums so the FMA chains overlap instead of serializing.
PANSHARP_HOT_CLONES
double dot_rows(const double* a, const double* b, i64 n) {
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, s5 = 0, s6 = 0, s7 = 0;
  i64 i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
    s4 += a[i + 4] * b[i + 4];
    s5 += a[i + 5] * b[i + 5];
    s6 += a[i + 6] * b[i + 6];
    s7 += a[i + 7] * b[i + 7];
  }
  double s = ((s0 + s1) + (s2 + s3)) + ((s4 + s5) + (s6 + s7));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

// Copies one (h x w) plane into the middle of a (h+2ph x w+2pw) buffer,
// filling the border by zero or edge replication.
void pad_plane(const double* in, i64 h, i64 w, double* out, i64 ph, i64 pw,
               Padding pad) {
  const i64 pw2 = w + 2 * pw;
  if (pad == Padding::Zero) {
    std::memset(out, 0, sizeof(double) * static_cast<size_t>((h + 2 * ph) * pw2));
    for (i64 y = 0; y < h; ++y)
      std::memcpy(out + (y + ph) * pw2 + pw, in + y * w,
                  sizeof(double) * static_cast<size_t>(w));
    return;
  }
  for (i64 py = 0; py < h + 2 * ph; ++py) {
    const i64 sy = std::clamp<i64>(py - ph, 0, h - 1);
    double* o = out + py * pw2;
    const double* r = in + sy * w;
    for (i64 px = 0; px < pw; ++px) o[px] = r[0];
    std::memcpy(o + pw, r, sizeof(double) * static_cast<size_t>(w));
    for (i64 px = 0; px < pw; ++px) o[pw + w + px] = r[w - 1];
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& wt, Padding pad) {
  const Shape xs = x.shape();
  const Shape ws = wt.shape();
  if (ws.c != xs.c)
    throw ContractViolation("conv2d: weight cin " + std::to_string(ws.c) +
                            " != input channels " + std::to_string(xs.c));
  if (ws.h % 2 == 0 || ws.w % 2 == 0)
    throw ContractViolation("conv2d: kernel dims must be odd, got " + ws.str());
  const i64 co = ws.n, ci = ws.c, kh = ws.h, kw = ws.w;
  const i64 ph = kh / 2, pw = kw / 2;
  const i64 h = xs.h, w = xs.w;
  const i64 ph2 = h + 2 * ph, pw2 = w + 2 * pw;

  Tape* tape = nullptr;
  for (const Tensor* t : {&x, &wt}) {
    if (!t->tracked()) continue;
    if (tape && t->tape() != tape)
      throw ContractViolation("conv2d mixes tensors from different tapes");
    tape = t->tape();
  }

  auto xd = x.data();
  auto wd = wt.data();
  auto padded = std::make_shared<std::vector<double>>(
      static_cast<size_t>(xs.n * ci * ph2 * pw2));
  for (i64 n = 0; n < xs.n; ++n)
    for (i64 c = 0; c < ci; ++c)
      pad_plane(xd.data() + (n * ci + c) * h * w, h, w,
                padded->data() + (n * ci + c) * ph2 * pw2, ph, pw, pad);

  const Shape os{xs.n, co, h, w};
  std::vector<double> out(static_cast<size_t>(os.numel()), 0.0);
  for (i64 n = 0; n < xs.n; ++n)
    for (i64 o = 0; o < co; ++o) {
      double* op = out.data() + (n * co + o) * h * w;
      for (i64 c = 0; c < ci; ++c)
        acc_plane(padded->data() + (n * ci + c) * ph2 * pw2, pw2, op, h, w,
                  wd.data() + (o * ci + c) * kh * kw, kh, kw);
    }

  if (!tape) return Tensor::from_data(os, std::move(out));

  BackwardFn bw = [x, wt, padded, pad, xs, ws](std::span<const double> g,
                                               GradSink& sink) {
    const i64 co = ws.n, ci = ws.c, kh = ws.h, kw = ws.w;
    const i64 ph = kh / 2, pw = kw / 2;
    const i64 h = xs.h, w = xs.w;
    const i64 ph2 = h + 2 * ph, pw2 = w + 2 * pw;
    auto wd = wt.data();
    auto gx = sink.slot(0);
    auto gw = sink.slot(1);

    if (!gx.empty()) {
      // d/d(padded) = valid conv of zero-extended gout with the flipped
      // kernel, accumulated over output channels. The extended buffer is
      // zeroed once; every pass overwrites the same interior rows.
      const i64 gh = h + 2 * (kh - 1), gw2 = w + 2 * (kw - 1);
      std::vector<double> gz(static_cast<size_t>(gh * gw2), 0.0);
      std::vector<double> wf(static_cast<size_t>(kh * kw));
      std::vector<double> dpad(static_cast<size_t>(ci * ph2 * pw2));
      for (i64 n = 0; n < xs.n; ++n) {
        std::fill(dpad.begin(), dpad.end(), 0.0);
        for (i64 o = 0; o < co; ++o) {
          const double* gp = g.data() + (n * co + o) * h * w;
          for (i64 y = 0; y < h; ++y)
            std::memcpy(gz.data() + (y + kh - 1) * gw2 + (kw - 1), gp + y * w,
                        sizeof(double) * static_cast<size_t>(w));
          for (i64 c = 0; c < ci; ++c) {
            const double* wp = wd.data() + (o * ci + c) * kh * kw;
            for (i64 i = 0; i < kh * kw; ++i) wf[static_cast<size_t>(i)] =
                wp[kh * kw - 1 - i];
            acc_plane(gz.data(), gw2, dpad.data() + c * ph2 * pw2, ph2, pw2,
                      wf.data(), kh, kw);
          }
        }
        // Fold the padded-plane gradients back onto the input planes.
        for (i64 c = 0; c < ci; ++c) {
          const double* dp = dpad.data() + c * ph2 * pw2;
          double* gxp = gx.data() + (n * ci + c) * h * w;
          if (pad == Padding::Zero) {
            for (i64 y = 0; y < h; ++y)
              for (i64 xq = 0; xq < w; ++xq)
                gxp[y * w + xq] += dp[(y + ph) * pw2 + (xq + pw)];
          } else {
            for (i64 py = 0; py < ph2; ++py) {
              const i64 sy = std::clamp<i64>(py - ph, 0, h - 1);
              for (i64 px = 0; px < pw2; ++px) {
                const i64 sx = std::clamp<i64>(px - pw, 0, w - 1);
                gxp[sy * w + sx] += dp[py * pw2 + px];
              }
            }
          }
        }
      }
    }

    if (!gw.empty()) {
      // dw(o,c,ky,kx) = sum over image of gout(o) * padded(c) shifted by (ky,kx).
      for (i64 n = 0; n < xs.n; ++n)
        for (i64 o = 0; o < co; ++o) {
          const double* gp = g.data() + (n * co + o) * h * w;
          for (i64 c = 0; c < ci; ++c) {
            const double* pp = padded->data() + (n * ci + c) * ph2 * pw2;
            double* gwp = gw.data() + (o * ci + c) * kh * kw;
            if (kh == 3 && kw == 3) {
              corr_3x3(pp, pw2, gp, h, w, gwp);
              continue;
            }
            for (i64 ky = 0; ky < kh; ++ky)
              for (i64 kx = 0; kx < kw; ++kx) {
                double acc = 0.0;
                for (i64 y = 0; y < h; ++y)
                  acc += dot_rows(pp + (y + ky) * pw2 + kx, gp + y * w, w);
                gwp[ky * kw + kx] += acc;
              }
          }
        }
    }
  };
  return tape->emit(os, std::move(out), {x.node(), wt.node()}, std::move(bw));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  const Shape as = a.shape(), bs = b.shape();
  if (as.n != 1 || as.c != 1 || bs.n != 1 || bs.c != 1)
    throw ContractViolation("matmul: inputs must have n = c = 1");
  if (as.w != bs.h)
    throw ContractViolation("matmul: inner dims " + as.str() + " x " + bs.str());
  const i64 m = as.h, k = as.w, p = bs.w;

  Tape* tape = nullptr;
  for (const Tensor* t : {&a, &b}) {
    if (!t->tracked()) continue;
    if (tape && t->tape() != tape)
      throw ContractViolation("matmul mixes tensors from different tapes");
    tape = t->tape();
  }

  auto ad = a.data();
  auto bd = b.data();
  std::vector<double> out(static_cast<size_t>(m * p), 0.0);
  for (i64 i = 0; i < m; ++i)
    for (i64 kk = 0; kk < k; ++kk) {
      const double av = ad[static_cast<size_t>(i * k + kk)];
      const double* br = bd.data() + kk * p;
      double* o = out.data() + i * p;
      for (i64 j = 0; j < p; ++j) o[j] += av * br[j];
    }

  const Shape os{1, 1, m, p};
  if (!tape) return Tensor::from_data(os, std::move(out));

  BackwardFn bw = [a, b, m, k, p](std::span<const double> g, GradSink& sink) {
    auto ad = a.data();
    auto bd = b.data();
    auto ga = sink.slot(0);
    auto gb = sink.slot(1);
    if (!ga.empty())  // ga = g . b^T
      for (i64 i = 0; i < m; ++i)
        for (i64 kk = 0; kk < k; ++kk) {
          double acc = 0.0;
          const double* gr = g.data() + i * p;
          const double* br = bd.data() + kk * p;
          for (i64 j = 0; j < p; ++j) acc += gr[j] * br[j];
          ga[static_cast<size_t>(i * k + kk)] += acc;
        }
    if (!gb.empty())  // gb = a^T . g
      for (i64 kk = 0; kk < k; ++kk)
        for (i64 i = 0; i < m; ++i) {
          const double av = ad[static_cast<size_t>(i * k + kk)];
          const double* gr = g.data() + i * p;
          double* o = gb.data() + kk * p;
          for (i64 j = 0; j < p; ++j) o[j] += av * gr[j];
        }
  };
  return tape->emit(os, std::move(out), {a.node(), b.node()}, std::move(bw));
}

}  // namespace pansharp::ad
