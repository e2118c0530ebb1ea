#include "pansharp/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace pansharp::ad {

namespace {

double eval_at(const std::function<Tensor(Tape&, const std::vector<Tensor>&)>& fn,
               const std::vector<Tensor>& points, size_t which, size_t elem,
               double value) {
  Tape tape;
  std::vector<Tensor> leaves;
  leaves.reserve(points.size());
  for (size_t i = 0; i < points.size(); ++i) {
    if (i == which) {
      auto d = points[i].data();
      std::vector<double> mod(d.begin(), d.end());
      mod[elem] = value;
      leaves.push_back(tape.leaf(Tensor::from_data(points[i].shape(), std::move(mod))));
    } else {
      leaves.push_back(tape.leaf(points[i]));
    }
  }
  Tensor root = fn(tape, leaves);
  if (root.numel() != 1)
    throw ContractViolation("grad_check: fn must return a scalar");
  return root.item();
}

}  // namespace

GradCheckReport grad_check(
    const std::function<Tensor(Tape&, const std::vector<Tensor>&)>& fn,
    const std::vector<Tensor>& points, double step, double tol,
    i64 max_per_input, std::uint64_t seed) {
  if (step <= 0.0) throw ContractViolation("grad_check: step must be positive");

  Tape tape;
  std::vector<Tensor> leaves;
  for (const Tensor& p : points) leaves.push_back(tape.leaf(p));
  Tensor root = fn(tape, leaves);
  if (root.numel() != 1)
    throw ContractViolation("grad_check: fn must return a scalar");
  const double f0 = root.item();
  Gradients grads = tape.backward(root);

  std::mt19937_64 rng(seed);
  GradCheckReport rep;

  for (size_t i = 0; i < points.size(); ++i) {
    auto pd = points[i].data();
    const i64 n = static_cast<i64>(pd.size());
    std::vector<i64> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    if (max_per_input >= 0 && n > max_per_input) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(static_cast<size_t>(max_per_input));
      std::sort(idx.begin(), idx.end());
    }
    std::span<const double> an =
        grads.contains(leaves[i]) ? grads.of(leaves[i]) : std::span<const double>{};

    for (i64 j : idx) {
      const size_t ej = static_cast<size_t>(j);
      const double x0 = pd[ej];
      const double fp = eval_at(fn, points, i, ej, x0 + step);
      const double fm = eval_at(fn, points, i, ej, x0 - step);
      const double dplus = (fp - f0) / step;
      const double dminus = (f0 - fm) / step;
      if (std::abs(dplus - dminus) >
          1e-2 * std::max({1.0, std::abs(dplus), std::abs(dminus)})) {
        ++rep.skipped_kinks;
        continue;
      }
      const double numeric = (fp - fm) / (2.0 * step);
      const double analytic = an.empty() ? 0.0 : an[ej];
      const double denom =
          std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      const double rel = std::abs(analytic - numeric) / denom;
      ++rep.checked;
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        std::ostringstream os;
        os << "input " << i << " elem " << j << ": analytic=" << analytic
           << " numeric=" << numeric << " rel=" << rel;
        rep.worst = os.str();
      }
    }
  }
  rep.pass = rep.max_rel_err < tol && rep.checked > 0;
  return rep;
}

}  // namespace pansharp::ad
