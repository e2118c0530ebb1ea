#include <array>
#include <cmath>

#include "pansharp/ops.hpp"

namespace pansharp::ad {

namespace {

Tape* common_tape(std::initializer_list<const Tensor*> ts) {
  Tape* tape = nullptr;
  for (const Tensor* t : ts) {
    if (!t->tracked()) continue;
    if (tape && t->tape() != tape)
      throw ContractViolation("op mixes tensors from different tapes");
    tape = t->tape();
  }
  return tape;
}

Tensor finish(Tape* tape, Shape s, std::vector<double> out,
              std::vector<i64> ids, BackwardFn bw) {
  if (!tape) return Tensor::from_data(s, std::move(out));
  return tape->emit(s, std::move(out), std::move(ids), std::move(bw));
}

struct BCast {
  Shape out;
  std::array<i64, 4> sa{}, sb{};  // strides, 0 on broadcast dims
};

BCast broadcast(const Shape& a, const Shape& b, const char* name) {
  auto dim = [&](i64 da, i64 db) -> i64 {
    if (da == db) return da;
    if (da == 1) return db;
    if (db == 1) return da;
    throw ContractViolation(std::string(name) + ": shapes " + a.str() +
                            " and " + b.str() + " do not broadcast");
  };
  BCast r;
  r.out = Shape{dim(a.n, b.n), dim(a.c, b.c), dim(a.h, b.h), dim(a.w, b.w)};
  auto strides = [](const Shape& s, const Shape& o, std::array<i64, 4>& st) {
    st[3] = (s.w == o.w) ? 1 : 0;
    st[2] = (s.h == o.h) ? s.w : 0;
    st[1] = (s.c == o.c) ? s.h * s.w : 0;
    st[0] = (s.n == o.n) ? s.c * s.h * s.w : 0;
  };
  strides(a, r.out, r.sa);
  strides(b, r.out, r.sb);
  return r;
}

// f(av, bv) -> value; ga/gb(g, av, bv) -> gradient contributions.
template <class F, class GA, class GB>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, F f, GA ga,
                 GB gb) {
  Tape* tape = common_tape({&a, &b});
  BCast bc = broadcast(a.shape(), b.shape(), name);
  auto ad = a.data();
  auto bd = b.data();
  std::vector<double> out(static_cast<size_t>(bc.out.numel()));

  if (a.shape() == b.shape()) {
    for (size_t i = 0; i < out.size(); ++i) out[i] = f(ad[i], bd[i]);
  } else {
    size_t o = 0;
    for (i64 n = 0; n < bc.out.n; ++n)
      for (i64 c = 0; c < bc.out.c; ++c)
        for (i64 y = 0; y < bc.out.h; ++y) {
          i64 ia0 = n * bc.sa[0] + c * bc.sa[1] + y * bc.sa[2];
          i64 ib0 = n * bc.sb[0] + c * bc.sb[1] + y * bc.sb[2];
          for (i64 x = 0; x < bc.out.w; ++x, ++o)
            out[o] = f(ad[static_cast<size_t>(ia0 + x * bc.sa[3])],
                       bd[static_cast<size_t>(ib0 + x * bc.sb[3])]);
        }
  }

  BackwardFn bw = [a, b, bc, ga, gb](std::span<const double> g, GradSink& sink) {
    auto ad = a.data();
    auto bd = b.data();
    auto sa = sink.slot(0);
    auto sb = sink.slot(1);
    if (sa.empty() && sb.empty()) return;
    if (a.shape() == b.shape()) {
      for (size_t i = 0; i < g.size(); ++i) {
        if (!sa.empty()) sa[i] += ga(g[i], ad[i], bd[i]);
        if (!sb.empty()) sb[i] += gb(g[i], ad[i], bd[i]);
      }
      return;
    }
    size_t o = 0;
    for (i64 n = 0; n < bc.out.n; ++n)
      for (i64 c = 0; c < bc.out.c; ++c)
        for (i64 y = 0; y < bc.out.h; ++y) {
          i64 ia0 = n * bc.sa[0] + c * bc.sa[1] + y * bc.sa[2];
          i64 ib0 = n * bc.sb[0] + c * bc.sb[1] + y * bc.sb[2];
          for (i64 x = 0; x < bc.out.w; ++x, ++o) {
            size_t ia = static_cast<size_t>(ia0 + x * bc.sa[3]);
            size_t ib = static_cast<size_t>(ib0 + x * bc.sb[3]);
            if (!sa.empty()) sa[ia] += ga(g[o], ad[ia], bd[ib]);
            if (!sb.empty()) sb[ib] += gb(g[o], ad[ia], bd[ib]);
          }
        }
  };
  return finish(tape, bc.out, std::move(out), {a.node(), b.node()},
                std::move(bw));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double g, double, double) { return g; },
      [](double g, double, double) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double g, double, double) { return g; },
      [](double g, double, double) { return -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double g, double, double y) { return g * y; },
      [](double g, double x, double) { return g * x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  for (double v : b.data())
    if (v == 0.0)
      throw NumericDomainError("div: exactly zero denominator");
  return binary_op(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double g, double, double y) { return g / y; },
      [](double g, double x, double y) { return -g * x / (y * y); });
}

Tensor scale(const Tensor& a, double s) { return mul(a, Tensor::scalar(s)); }
Tensor add_const(const Tensor& a, double s) { return add(a, Tensor::scalar(s)); }
Tensor neg(const Tensor& a) { return scale(a, -1.0); }

namespace {

// Unary with backward; df(x, y) where y = f(x).
template <class F, class DF>
Tensor make_unary(const Tensor& a, F f, DF df) {
  Tape* tape = common_tape({&a});
  auto ad = a.data();
  std::vector<double> out(ad.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = f(ad[i]);
  if (!tape) return Tensor::from_data(a.shape(), std::move(out));

  Tensor y = tape->emit(
      a.shape(), std::move(out), {a.node()},
      [a, df](std::span<const double> g, GradSink& sink) {
        auto sa = sink.slot(0);
        if (sa.empty()) return;
        auto ad = a.data();
        for (size_t i = 0; i < g.size(); ++i) sa[i] += g[i] * df(ad[i]);
      });
  return y;
}

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

}  // namespace

Tensor square(const Tensor& a) {
  return make_unary(
      a, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

Tensor sqrt_(const Tensor& a) {
  for (double v : a.data())
    if (v < 0.0) throw NumericDomainError("sqrt: negative input");
  return make_unary(
      a, [](double x) { return std::sqrt(x); },
      [](double x) { return x > 0.0 ? 0.5 / std::sqrt(x) : 0.0; });
}

Tensor relu(const Tensor& a) {
  return make_unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& a) {
  return make_unary(
      a,
      [](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); },
      [](double x) {
        double phi = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
        double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
        return phi + x * pdf;
      });
}

Tensor sigmoid(const Tensor& a) {
  Tape* tape = common_tape({&a});
  auto ad = a.data();
  std::vector<double> out(ad.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-ad[i]));
  if (!tape) return Tensor::from_data(a.shape(), std::move(out));
  auto saved = std::make_shared<std::vector<double>>(out);
  return tape->emit(a.shape(), std::move(out), {a.node()},
                    [saved](std::span<const double> g, GradSink& sink) {
                      auto sa = sink.slot(0);
                      if (sa.empty()) return;
                      for (size_t i = 0; i < g.size(); ++i) {
                        double s = (*saved)[i];
                        sa[i] += g[i] * s * (1.0 - s);
                      }
                    });
}

Tensor clamp_min(const Tensor& a, double lo) {
  return make_unary(
      a, [lo](double x) { return x > lo ? x : lo; },
      [lo](double x) { return x > lo ? 1.0 : 0.0; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  if (!(lo < hi)) throw ContractViolation("clamp: lo must be < hi");
  return make_unary(
      a,
      [lo, hi](double x) { return x < lo ? lo : (x > hi ? hi : x); },
      [lo, hi](double x) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Tensor less_mask(const Tensor& a, const Tensor& b) {
  BCast bc = broadcast(a.shape(), b.shape(), "less_mask");
  auto ad = a.data();
  auto bd = b.data();
  std::vector<double> out(static_cast<size_t>(bc.out.numel()));
  size_t o = 0;
  for (i64 n = 0; n < bc.out.n; ++n)
    for (i64 c = 0; c < bc.out.c; ++c)
      for (i64 y = 0; y < bc.out.h; ++y) {
        i64 ia0 = n * bc.sa[0] + c * bc.sa[1] + y * bc.sa[2];
        i64 ib0 = n * bc.sb[0] + c * bc.sb[1] + y * bc.sb[2];
        for (i64 x = 0; x < bc.out.w; ++x, ++o)
          out[o] = ad[static_cast<size_t>(ia0 + x * bc.sa[3])] <
                           bd[static_cast<size_t>(ib0 + x * bc.sb[3])]
                       ? 1.0
                       : 0.0;
      }
  return Tensor::from_data(bc.out, std::move(out));
}

bool all_finite(const Tensor& a) {
  for (double v : a.data())
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace pansharp::ad
