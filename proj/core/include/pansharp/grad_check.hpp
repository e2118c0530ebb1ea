#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pansharp/tensor.hpp"

namespace pansharp::ad {

struct GradCheckReport {
  double max_rel_err = 0.0;
  i64 checked = 0;
  i64 skipped_kinks = 0;
  bool pass = false;
  std::string worst;
};

// Compares reverse-mode gradients of fn against central finite
// differences. fn gets one tracked leaf per entry of `points` and must
// return a scalar on the given tape; it is re-evaluated on fresh tapes
// for the perturbed points. Elements whose two one-sided differences
// disagree are sitting on a kink (relu/max/clamp boundary) and are
// skipped rather than failed. If max_per_input >= 0, at most that many
// elements per input are probed, chosen by a seeded RNG.
GradCheckReport grad_check(
    const std::function<Tensor(Tape&, const std::vector<Tensor>&)>& fn,
    const std::vector<Tensor>& points, double step, double tol,
    i64 max_per_input = -1, std::uint64_t seed = 0x9e3779b97f4a7c15ULL);

}  // namespace pansharp::ad
