#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pansharp/raster.hpp"
#include "pansharp/tensor.hpp"

namespace pansharp::model {

using ad::i64;

// One parameter tensor in the fixed network layout.
struct ParamSpec {
  std::string name;
  ad::Shape shape;
};

// Fusion network parameters in layout order. The trunk is
// head1, head2, att1, res1, att2, res2, out: seven 3x3 convolutions
// plus two attention blocks (squeeze/excite perceptron and a 7x7
// spatial map each).
struct ModelWeights {
  i64 bands = 0;
  std::uint64_t seed = 0;
  std::vector<ad::Tensor> params;

  // Tracked copy whose params are leaves on the tape.
  ModelWeights leafed(ad::Tape& tape) const;
  i64 parameter_count() const;
};

const std::vector<ParamSpec>& layout(i64 bands);
i64 parameter_count_for(i64 bands);

// He fan-in init for conv weights, zeros for biases; the output conv is
// scaled down so the first forward stays near the skip path. The
// normal sampler is hand-rolled so identical seeds reproduce across
// standard-library versions.
ModelWeights init_model(i64 bands, std::uint64_t seed);

// x + conv(gelu(conv(x))).
ad::Tensor resblock_t(const ad::Tensor& x, const ad::Tensor& w1,
                      const ad::Tensor& b1, const ad::Tensor& w2,
                      const ad::Tensor& b2);

// Residual attention: channel gains from pooled statistics through the
// shared squeeze/excite perceptron, then a spatial map from channel
// max/avg through a 7x7 conv; returns x + attended(x).
ad::Tensor rcbam_t(const ad::Tensor& x, const ad::Tensor& sq_w,
                   const ad::Tensor& sq_b, const ad::Tensor& ex_w,
                   const ad::Tensor& ex_b, const ad::Tensor& sp_w,
                   const ad::Tensor& sp_b);

// M-hat = mtilde + range * trunk(concat(mtilde, pan) / range). The
// range normalization keeps activations O(1); zero trunk weights give
// back mtilde bit-for-bit. pan is (1,1,H,W), mtilde (1,B,H,W).
ad::Tensor forward_t(const ModelWeights& w, const ad::Tensor& pan,
                     const ad::Tensor& mtilde, double range);

// Untracked convenience wrapper; range taken from the pan raster.
Raster forward(const ModelWeights& w, const Raster& pan, const Raster& mtilde);

// Checkpoint: one file, a JSON manifest line (layout, shapes, bands,
// seed) followed by the raw parameter payload, little-endian float32
// in layout order.
void save_weights(const std::string& path, const ModelWeights& w);
ModelWeights load_weights(const std::string& path);

}  // namespace pansharp::model
