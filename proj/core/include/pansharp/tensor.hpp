#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "pansharp/errors.hpp"

namespace pansharp::ad {

using i64 = std::int64_t;

// Dense layout is (n, c, h, w), row-major, w fastest.
struct Shape {
  i64 n = 1;
  i64 c = 1;
  i64 h = 1;
  i64 w = 1;

  i64 numel() const { return n * c * h * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

class Tape;

// Immutable 4-d array of doubles. Copies are shallow (shared storage).
// A tensor is either a plain constant or tracked on a Tape, in which
// case it remembers the tape node that produced it.
class Tensor {
 public:
  Tensor() = default;

  static Tensor from_data(Shape s, std::vector<double> data);
  static Tensor full(Shape s, double value);
  static Tensor zeros(Shape s) { return full(s, 0.0); }
  static Tensor scalar(double value) { return full(Shape{1, 1, 1, 1}, value); }

  const Shape& shape() const { return shape_; }
  i64 numel() const { return shape_.numel(); }
  bool defined() const { return data_ != nullptr; }

  std::span<const double> data() const;
  double at(i64 n, i64 c, i64 y, i64 x) const;
  double item() const;

  bool tracked() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  i64 node() const { return node_; }

  // Same storage, not tracked on any tape.
  Tensor detached() const;

 private:
  friend class Tape;
  std::shared_ptr<const std::vector<double>> data_;
  Shape shape_;
  Tape* tape_ = nullptr;
  i64 node_ = -1;
};

// Gradient accumulation buffers for one node's inputs, handed to the
// node's backward function. slot(k) is where the gradient w.r.t. input
// k must be accumulated (+=); an empty span means input k is untracked
// and its gradient is discarded.
class GradSink {
 public:
  std::span<double> slot(std::size_t k);

 private:
  friend class Tape;
  GradSink(Tape& tape, const std::vector<i64>& input_ids)
      : tape_(tape), ids_(input_ids) {}
  Tape& tape_;
  const std::vector<i64>& ids_;
};

using BackwardFn = std::function<void(std::span<const double> gout, GradSink& sink)>;

// Gradients of a scalar root with respect to the tape's leaves.
class Gradients {
 public:
  bool contains(const Tensor& leaf) const;
  // Dense buffer with the same layout as the leaf.
  std::span<const double> of(const Tensor& leaf) const;

 private:
  friend class Tape;
  std::unordered_map<i64, std::vector<double>> by_node_;
};

// Record of operations for reverse-mode differentiation. Single use:
// build a graph, call backward() once, then discard.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Registers `value` as a differentiable input and returns its
  // tracked handle.
  Tensor leaf(const Tensor& value);

  // Used by op implementations. `input_ids` lists the producing node of
  // every differentiable input, -1 for untracked ones. `bw` receives the
  // output gradient and accumulates into the inputs' buffers.
  Tensor emit(Shape s, std::vector<double> data, std::vector<i64> input_ids,
              BackwardFn bw);

  // Reverse accumulation from a tracked scalar produced on this tape.
  // Consumes the tape: any further emit/backward throws.
  Gradients backward(const Tensor& root);

  i64 size() const { return static_cast<i64>(nodes_.size()); }
  bool consumed() const { return consumed_; }

 private:
  friend class GradSink;
  struct Node {
    Shape shape;
    std::vector<i64> inputs;
    BackwardFn bw;  // empty for leaves
    bool is_leaf = false;
  };
  std::span<double> grad_buffer(i64 node_id);

  std::vector<Node> nodes_;
  std::vector<std::unique_ptr<std::vector<double>>> grads_;
  bool consumed_ = false;
};

}  // namespace pansharp::ad
