#pragma once

#include <vector>

#include "pansharp/tensor.hpp"

// Differentiable op set. Every op consumes tensors and produces a new
// tensor; if any input is tracked, the result is tracked on the same
// tape and a backward rule is recorded. Adding an op means adding its
// backward rule here and a finite-difference case in the gradient test
// table; there is no other way to extend the graph.

namespace pansharp::ad {

enum class Padding { Zero, Replicate };

// Elementwise, with numpy-style broadcasting over all four dims.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// Throws NumericDomainError if any (broadcast) denominator is exactly 0.
Tensor div(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double s);     // a * s
Tensor add_const(const Tensor& a, double s); // a + s
Tensor neg(const Tensor& a);

// Unary elementwise.
Tensor square(const Tensor& a);
// Throws NumericDomainError on negative input; derivative at 0 is taken as 0.
Tensor sqrt_(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);  // exact erf form
Tensor sigmoid(const Tensor& a);
// max(a, lo): derivative 1 where a > lo, else 0.
Tensor clamp_min(const Tensor& a, double lo);
// min(max(a, lo), hi): derivative 1 strictly inside (lo, hi), else 0.
Tensor clamp(const Tensor& a, double lo, double hi);

// Reductions.
Tensor sum(const Tensor& a);   // scalar
Tensor mean(const Tensor& a);  // scalar
// Mean over win x win blocks anchored at (oy*stride, ox*stride) per
// (n, c); output h = (h - win) / stride + 1, likewise w. Blocks beyond
// the last full window are dropped.
Tensor windowed_mean(const Tensor& a, i64 win, i64 stride);

// Pooling / channel statistics.
Tensor global_max_pool(const Tensor& a);  // (n,c,1,1), first-index tie break
Tensor global_avg_pool(const Tensor& a);  // (n,c,1,1)
Tensor channel_max(const Tensor& a);      // (n,1,h,w), first-channel tie break
Tensor channel_avg(const Tensor& a);      // (n,1,h,w)

// Structure.
Tensor concat_channels(const std::vector<Tensor>& xs);
// Keeps channels [c0, c1) and the spatial box [y0, y1) x [x0, x1).
Tensor crop(const Tensor& a, i64 c0, i64 c1, i64 y0, i64 y1, i64 x0, i64 x1);
// y(r, c) = x(oy + r*stride, ox + c*stride).
Tensor subsample(const Tensor& a, i64 stride, i64 oy, i64 ox);
// Bilinear sample y(r, c) = x(r + dy, c + dx), reads clamped to the
// border. |dx|, |dy| <= max_shift contract (checked against 8).
Tensor spatial_shift(const Tensor& a, double dx, double dy);

// conv2d with odd-sized kernels, stride 1, same-size output.
// weight shape (cout, cin, kh, kw); x shape (n, cin, h, w).
Tensor conv2d(const Tensor& x, const Tensor& w, Padding pad);

// 2-d matrix product on the (h, w) dims; both inputs need n = c = 1.
Tensor matmul(const Tensor& a, const Tensor& b);

// Non-tracked helpers (results are constants even if inputs are tracked).
// Elementwise indicator (a < b), broadcast like add.
Tensor less_mask(const Tensor& a, const Tensor& b);
bool all_finite(const Tensor& a);

}  // namespace pansharp::ad
