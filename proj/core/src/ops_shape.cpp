#include <algorithm>
#include <cmath>
#include <cstring>

#include "pansharp/ops.hpp"

namespace pansharp::ad {

Tensor concat_channels(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw ContractViolation("concat_channels: empty input list");
  const Shape s0 = xs[0].shape();
  i64 ctotal = 0;
  Tape* tape = nullptr;
  for (const Tensor& t : xs) {
    const Shape s = t.shape();
    if (s.n != s0.n || s.h != s0.h || s.w != s0.w)
      throw ContractViolation("concat_channels: mismatched shapes " + s0.str() +
                              " vs " + s.str());
    ctotal += s.c;
    if (t.tracked()) {
      if (tape && t.tape() != tape)
        throw ContractViolation("concat_channels mixes tapes");
      tape = t.tape();
    }
  }
  const Shape os{s0.n, ctotal, s0.h, s0.w};
  const i64 plane = s0.h * s0.w;
  std::vector<double> out(static_cast<size_t>(os.numel()));
  for (i64 n = 0; n < s0.n; ++n) {
    i64 coff = 0;
    for (const Tensor& t : xs) {
      const i64 tc = t.shape().c;
      std::memcpy(out.data() + (n * ctotal + coff) * plane,
                  t.data().data() + n * tc * plane,
                  sizeof(double) * static_cast<size_t>(tc * plane));
      coff += tc;
    }
  }
  if (!tape) return Tensor::from_data(os, std::move(out));

  std::vector<i64> ids;
  std::vector<i64> chans;
  for (const Tensor& t : xs) {
    ids.push_back(t.node());
    chans.push_back(t.shape().c);
  }
  const i64 nn = s0.n;
  BackwardFn bw = [chans, ctotal, plane, nn](std::span<const double> g,
                                             GradSink& sink) {
    for (i64 n = 0; n < nn; ++n) {
      i64 coff = 0;
      for (size_t k = 0; k < chans.size(); ++k) {
        auto sl = sink.slot(k);
        const i64 tc = chans[k];
        if (!sl.empty()) {
          const double* gp = g.data() + (n * ctotal + coff) * plane;
          double* o = sl.data() + n * tc * plane;
          for (i64 i = 0; i < tc * plane; ++i) o[i] += gp[i];
        }
        coff += tc;
      }
    }
  };
  return tape->emit(os, std::move(out), std::move(ids), std::move(bw));
}

Tensor crop(const Tensor& a, i64 c0, i64 c1, i64 y0, i64 y1, i64 x0, i64 x1) {
  const Shape s = a.shape();
  if (c0 < 0 || c1 > s.c || y0 < 0 || y1 > s.h || x0 < 0 || x1 > s.w ||
      c0 >= c1 || y0 >= y1 || x0 >= x1)
    throw ContractViolation("crop: box out of range for " + s.str());
  const Shape os{s.n, c1 - c0, y1 - y0, x1 - x0};
  auto ad = a.data();
  std::vector<double> out(static_cast<size_t>(os.numel()));
  size_t o = 0;
  for (i64 n = 0; n < s.n; ++n)
    for (i64 c = c0; c < c1; ++c)
      for (i64 y = y0; y < y1; ++y) {
        const double* r = ad.data() + ((n * s.c + c) * s.h + y) * s.w + x0;
        for (i64 x = 0; x < os.w; ++x) out[o++] = r[x];
      }
  if (!a.tracked()) return Tensor::from_data(os, std::move(out));

  BackwardFn bw = [s, os, c0, y0, x0](std::span<const double> g, GradSink& sink) {
    auto sa = sink.slot(0);
    if (sa.empty()) return;
    size_t o = 0;
    for (i64 n = 0; n < s.n; ++n)
      for (i64 c = 0; c < os.c; ++c)
        for (i64 y = 0; y < os.h; ++y) {
          double* r = sa.data() + ((n * s.c + c + c0) * s.h + y + y0) * s.w + x0;
          for (i64 x = 0; x < os.w; ++x) r[x] += g[o++];
        }
  };
  return a.tape()->emit(os, std::move(out), {a.node()}, std::move(bw));
}

Tensor subsample(const Tensor& a, i64 stride, i64 oy, i64 ox) {
  const Shape s = a.shape();
  if (stride < 1 || oy < 0 || ox < 0 || oy >= s.h || ox >= s.w)
    throw ContractViolation("subsample: bad stride/offset for " + s.str());
  const i64 oh = (s.h - 1 - oy) / stride + 1;
  const i64 ow = (s.w - 1 - ox) / stride + 1;
  const Shape os{s.n, s.c, oh, ow};
  auto ad = a.data();
  std::vector<double> out(static_cast<size_t>(os.numel()));
  size_t o = 0;
  for (i64 p = 0; p < s.n * s.c; ++p) {
    const double* in = ad.data() + p * s.h * s.w;
    for (i64 y = 0; y < oh; ++y) {
      const double* r = in + (oy + y * stride) * s.w + ox;
      for (i64 x = 0; x < ow; ++x) out[o++] = r[x * stride];
    }
  }
  if (!a.tracked()) return Tensor::from_data(os, std::move(out));

  BackwardFn bw = [s, os, stride, oy, ox](std::span<const double> g, GradSink& sink) {
    auto sa = sink.slot(0);
    if (sa.empty()) return;
    size_t o = 0;
    for (i64 p = 0; p < s.n * s.c; ++p) {
      double* gx = sa.data() + p * s.h * s.w;
      for (i64 y = 0; y < os.h; ++y) {
        double* r = gx + (oy + y * stride) * s.w + ox;
        for (i64 x = 0; x < os.w; ++x) r[x * stride] += g[o++];
      }
    }
  };
  return a.tape()->emit(os, std::move(out), {a.node()}, std::move(bw));
}

Tensor spatial_shift(const Tensor& a, double dx, double dy) {
  if (std::abs(dx) > 8.0 || std::abs(dy) > 8.0)
    throw ContractViolation("spatial_shift: |shift| exceeds 8 pixels");
  const Shape s = a.shape();
  auto ad = a.data();
  std::vector<double> out(static_cast<size_t>(s.numel()));

  const double fy = std::floor(dy), fx = std::floor(dx);
  const i64 iy = static_cast<i64>(fy), ix = static_cast<i64>(fx);
  const double ry = dy - fy, rx = dx - fx;
  const double w00 = (1.0 - ry) * (1.0 - rx), w01 = (1.0 - ry) * rx;
  const double w10 = ry * (1.0 - rx), w11 = ry * rx;
  auto cy = [&](i64 y) { return std::clamp<i64>(y, 0, s.h - 1); };
  auto cx = [&](i64 x) { return std::clamp<i64>(x, 0, s.w - 1); };

  size_t o = 0;
  for (i64 p = 0; p < s.n * s.c; ++p) {
    const double* in = ad.data() + p * s.h * s.w;
    for (i64 y = 0; y < s.h; ++y) {
      const i64 y0 = cy(y + iy), y1 = cy(y + iy + 1);
      for (i64 x = 0; x < s.w; ++x, ++o) {
        const i64 x0 = cx(x + ix), x1 = cx(x + ix + 1);
        out[o] = w00 * in[y0 * s.w + x0] + w01 * in[y0 * s.w + x1] +
                 w10 * in[y1 * s.w + x0] + w11 * in[y1 * s.w + x1];
      }
    }
  }
  if (!a.tracked()) return Tensor::from_data(s, std::move(out));

  BackwardFn bw = [s, iy, ix, w00, w01, w10, w11](std::span<const double> g,
                                                  GradSink& sink) {
    auto sa = sink.slot(0);
    if (sa.empty()) return;
    auto cy = [&](i64 y) { return std::clamp<i64>(y, 0, s.h - 1); };
    auto cx = [&](i64 x) { return std::clamp<i64>(x, 0, s.w - 1); };
    size_t o = 0;
    for (i64 p = 0; p < s.n * s.c; ++p) {
      double* gx = sa.data() + p * s.h * s.w;
      for (i64 y = 0; y < s.h; ++y) {
        const i64 y0 = cy(y + iy), y1 = cy(y + iy + 1);
        for (i64 x = 0; x < s.w; ++x, ++o) {
          const i64 x0 = cx(x + ix), x1 = cx(x + ix + 1);
          const double gv = g[o];
          gx[y0 * s.w + x0] += gv * w00;
          gx[y0 * s.w + x1] += gv * w01;
          gx[y1 * s.w + x0] += gv * w10;
          gx[y1 * s.w + x1] += gv * w11;
        }
      }
    }
  };
  return a.tape()->emit(s, std::move(out), {a.node()}, std::move(bw));
}

}  // namespace pansharp::ad
