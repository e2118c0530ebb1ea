#include <algorithm>
#include <cmath>

#include "pansharp/ops.hpp"

namespace pansharp::ad {

namespace {

Tensor emit_or_plain(const Tensor& in, Shape s, std::vector<double> out,
                     BackwardFn bw) {
  if (!in.tracked()) return Tensor::from_data(s, std::move(out));
  return in.tape()->emit(s, std::move(out), {in.node()}, std::move(bw));
}

// Inclusive-prefix integral image with a zero top row/left column:
// S has (h+1) x (w+1) entries, S(y, x) = sum of src[0..y) x [0..x).
void integral(const double* src, i64 h, i64 w, std::vector<double>& S) {
  S.assign(static_cast<size_t>((h + 1) * (w + 1)), 0.0);
  for (i64 y = 0; y < h; ++y) {
    double row = 0.0;
    const double* s = src + y * w;
    double* out = S.data() + (y + 1) * (w + 1);
    const double* up = S.data() + y * (w + 1);
    for (i64 x = 0; x < w; ++x) {
      row += s[x];
      out[x + 1] = up[x + 1] + row;
    }
  }
}

double box(const std::vector<double>& S, i64 w1, i64 y0, i64 x0, i64 y1, i64 x1) {
  // sum over [y0, y1) x [x0, x1)
  return S[static_cast<size_t>(y1 * w1 + x1)] - S[static_cast<size_t>(y0 * w1 + x1)] -
         S[static_cast<size_t>(y1 * w1 + x0)] + S[static_cast<size_t>(y0 * w1 + x0)];
}

}  // namespace

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  i64 count = a.numel();
  return emit_or_plain(a, Shape{1, 1, 1, 1}, {s},
                       [count](std::span<const double> g, GradSink& sink) {
                         auto sa = sink.slot(0);
                         if (sa.empty()) return;
                         for (i64 i = 0; i < count; ++i) sa[static_cast<size_t>(i)] += g[0];
                       });
}

Tensor mean(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  i64 count = a.numel();
  double inv = 1.0 / static_cast<double>(count);
  return emit_or_plain(a, Shape{1, 1, 1, 1}, {s * inv},
                       [count, inv](std::span<const double> g, GradSink& sink) {
                         auto sa = sink.slot(0);
                         if (sa.empty()) return;
                         double gv = g[0] * inv;
                         for (i64 i = 0; i < count; ++i) sa[static_cast<size_t>(i)] += gv;
                       });
}

Tensor windowed_mean(const Tensor& a, i64 win, i64 stride) {
  const Shape s = a.shape();
  if (win < 1 || stride < 1)
    throw ContractViolation("windowed_mean: win and stride must be >= 1");
  if (win > s.h || win > s.w)
    throw ContractViolation("windowed_mean: window " + std::to_string(win) +
                            " exceeds plane " + s.str());
  const i64 oh = (s.h - win) / stride + 1;
  const i64 ow = (s.w - win) / stride + 1;
  const Shape os{s.n, s.c, oh, ow};
  const double inv = 1.0 / static_cast<double>(win * win);
  const i64 planes = s.n * s.c;

  auto ad = a.data();
  std::vector<double> out(static_cast<size_t>(os.numel()));
  if (stride == 1) {
    std::vector<double> S;
    for (i64 p = 0; p < planes; ++p) {
      integral(ad.data() + p * s.h * s.w, s.h, s.w, S);
      double* o = out.data() + p * oh * ow;
      for (i64 y = 0; y < oh; ++y)
        for (i64 x = 0; x < ow; ++x)
          o[y * ow + x] = box(S, s.w + 1, y, x, y + win, x + win) * inv;
    }
  } else {
    for (i64 p = 0; p < planes; ++p) {
      const double* in = ad.data() + p * s.h * s.w;
      double* o = out.data() + p * oh * ow;
      for (i64 y = 0; y < oh; ++y)
        for (i64 x = 0; x < ow; ++x) {
          double acc = 0.0;
          for (i64 ky = 0; ky < win; ++ky) {
            const double* row = in + (y * stride + ky) * s.w + x * stride;
            for (i64 kx = 0; kx < win; ++kx) acc += row[kx];
          }
          o[y * ow + x] = acc * inv;
        }
    }
  }

  BackwardFn bw = [s, os, win, stride, inv, planes](std::span<const double> g,
                                                    GradSink& sink) {
    auto sa = sink.slot(0);
    if (sa.empty()) return;
    const i64 oh = os.h, ow = os.w;
    if (stride == 1) {
      std::vector<double> S;
      for (i64 p = 0; p < planes; ++p) {
        integral(g.data() + p * oh * ow, oh, ow, S);
        double* gx = sa.data() + p * s.h * s.w;
        for (i64 y = 0; y < s.h; ++y) {
          i64 y0 = std::max<i64>(0, y - win + 1), y1 = std::min(oh - 1, y) + 1;
          for (i64 x = 0; x < s.w; ++x) {
            i64 x0 = std::max<i64>(0, x - win + 1), x1 = std::min(ow - 1, x) + 1;
            gx[y * s.w + x] += box(S, ow + 1, y0, x0, y1, x1) * inv;
          }
        }
      }
    } else {
      for (i64 p = 0; p < planes; ++p) {
        const double* go = g.data() + p * oh * ow;
        double* gx = sa.data() + p * s.h * s.w;
        for (i64 y = 0; y < oh; ++y)
          for (i64 x = 0; x < ow; ++x) {
            double gv = go[y * ow + x] * inv;
            for (i64 ky = 0; ky < win; ++ky) {
              double* row = gx + (y * stride + ky) * s.w + x * stride;
              for (i64 kx = 0; kx < win; ++kx) row[kx] += gv;
            }
          }
      }
    }
  };
  return emit_or_plain(a, os, std::move(out), std::move(bw));
}

Tensor global_max_pool(const Tensor& a) {
  const Shape s = a.shape();
  const i64 plane = s.h * s.w;
  const i64 planes = s.n * s.c;
  auto ad = a.data();
  std::vector<double> out(static_cast<size_t>(planes));
  auto arg = std::make_shared<std::vector<i64>>(static_cast<size_t>(planes));
  for (i64 p = 0; p < planes; ++p) {
    const double* in = ad.data() + p * plane;
    i64 best = 0;
    for (i64 i = 1; i < plane; ++i)
      if (in[i] > in[best]) best = i;  // ties keep the first index
    out[static_cast<size_t>(p)] = in[best];
    (*arg)[static_cast<size_t>(p)] = best;
  }
  return emit_or_plain(a, Shape{s.n, s.c, 1, 1}, std::move(out),
                       [arg, plane, planes](std::span<const double> g, GradSink& sink) {
                         auto sa = sink.slot(0);
                         if (sa.empty()) return;
                         for (i64 p = 0; p < planes; ++p)
                           sa[static_cast<size_t>(p * plane + (*arg)[static_cast<size_t>(p)])] +=
                               g[static_cast<size_t>(p)];
                       });
}

Tensor global_avg_pool(const Tensor& a) {
  const Shape s = a.shape();
  const i64 plane = s.h * s.w;
  const i64 planes = s.n * s.c;
  const double inv = 1.0 / static_cast<double>(plane);
  auto ad = a.data();
  std::vector<double> out(static_cast<size_t>(planes));
  for (i64 p = 0; p < planes; ++p) {
    double acc = 0.0;
    const double* in = ad.data() + p * plane;
    for (i64 i = 0; i < plane; ++i) acc += in[i];
    out[static_cast<size_t>(p)] = acc * inv;
  }
  return emit_or_plain(a, Shape{s.n, s.c, 1, 1}, std::move(out),
                       [plane, planes, inv](std::span<const double> g, GradSink& sink) {
                         auto sa = sink.slot(0);
                         if (sa.empty()) return;
                         for (i64 p = 0; p < planes; ++p) {
                           double gv = g[static_cast<size_t>(p)] * inv;
                           double* gx = sa.data() + p * plane;
                           for (i64 i = 0; i < plane; ++i) gx[i] += gv;
                         }
                       });
}

Tensor channel_max(const Tensor& a) {
  const Shape s = a.shape();
  const i64 plane = s.h * s.w;
  auto ad = a.data();
  std::vector<double> out(static_cast<size_t>(s.n * plane));
  auto arg = std::make_shared<std::vector<i64>>(out.size());
  for (i64 n = 0; n < s.n; ++n)
    for (i64 i = 0; i < plane; ++i) {
      const double* base = ad.data() + n * s.c * plane + i;
      i64 best = 0;
      for (i64 c = 1; c < s.c; ++c)
        if (base[c * plane] > base[best * plane]) best = c;
      out[static_cast<size_t>(n * plane + i)] = base[best * plane];
      (*arg)[static_cast<size_t>(n * plane + i)] = best;
    }
  return emit_or_plain(a, Shape{s.n, 1, s.h, s.w}, std::move(out),
                       [arg, s, plane](std::span<const double> g, GradSink& sink) {
                         auto sa = sink.slot(0);
                         if (sa.empty()) return;
                         for (i64 n = 0; n < s.n; ++n)
                           for (i64 i = 0; i < plane; ++i) {
                             i64 c = (*arg)[static_cast<size_t>(n * plane + i)];
                             sa[static_cast<size_t>((n * s.c + c) * plane + i)] +=
                                 g[static_cast<size_t>(n * plane + i)];
                           }
                       });
}

Tensor channel_avg(const Tensor& a) {
  const Shape s = a.shape();
  const i64 plane = s.h * s.w;
  const double inv = 1.0 / static_cast<double>(s.c);
  auto ad = a.data();
  std::vector<double> out(static_cast<size_t>(s.n * plane), 0.0);
  for (i64 n = 0; n < s.n; ++n)
    for (i64 c = 0; c < s.c; ++c) {
      const double* in = ad.data() + (n * s.c + c) * plane;
      double* o = out.data() + n * plane;
      for (i64 i = 0; i < plane; ++i) o[i] += in[i];
    }
  for (double& v : out) v *= inv;
  return emit_or_plain(a, Shape{s.n, 1, s.h, s.w}, std::move(out),
                       [s, plane, inv](std::span<const double> g, GradSink& sink) {
                         auto sa = sink.slot(0);
                         if (sa.empty()) return;
                         for (i64 n = 0; n < s.n; ++n)
                           for (i64 c = 0; c < s.c; ++c) {
                             double* gx = sa.data() + (n * s.c + c) * plane;
                             const double* go = g.data() + n * plane;
                             for (i64 i = 0; i < plane; ++i) gx[i] += go[i] * inv;
                           }
                       });
}

}  // namespace pansharp::ad
