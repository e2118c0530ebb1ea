#include "pansharp/tensor.hpp"

#include <sstream>

namespace pansharp::ad {

std::string Shape::str() const {
  std::ostringstream os;
  os << "(" << n << "," << c << "," << h << "," << w << ")";
  return os.str();
}

Tensor Tensor::from_data(Shape s, std::vector<double> data) {
  if (static_cast<i64>(data.size()) != s.numel())
    throw ContractViolation("from_data: " + std::to_string(data.size()) +
                            " values for shape " + s.str());
  Tensor t;
  t.shape_ = s;
  t.data_ = std::make_shared<const std::vector<double>>(std::move(data));
  return t;
}

Tensor Tensor::full(Shape s, double value) {
  return from_data(s, std::vector<double>(static_cast<size_t>(s.numel()), value));
}

std::span<const double> Tensor::data() const {
  if (!data_) throw ContractViolation("data() on undefined tensor");
  return {data_->data(), data_->size()};
}

double Tensor::at(i64 n, i64 c, i64 y, i64 x) const {
  auto d = data();
  i64 i = ((n * shape_.c + c) * shape_.h + y) * shape_.w + x;
  if (n < 0 || c < 0 || y < 0 || x < 0 || n >= shape_.n || c >= shape_.c ||
      y >= shape_.h || x >= shape_.w)
    throw ContractViolation("at(): index out of range for " + shape_.str());
  return d[static_cast<size_t>(i)];
}

double Tensor::item() const {
  if (numel() != 1)
    throw ContractViolation("item() on tensor of shape " + shape_.str());
  return data()[0];
}

Tensor Tensor::detached() const {
  Tensor t = *this;
  t.tape_ = nullptr;
  t.node_ = -1;
  return t;
}

std::span<double> GradSink::slot(std::size_t k) {
  if (k >= ids_.size())
    throw ContractViolation("GradSink: slot index out of range");
  i64 id = ids_[k];
  if (id < 0) return {};
  return tape_.grad_buffer(id);
}

Tensor Tape::leaf(const Tensor& value) {
  if (consumed_) throw ContractViolation("leaf() on a consumed tape");
  if (!value.defined()) throw ContractViolation("leaf() on undefined tensor");
  Node n;
  n.shape = value.shape();
  n.is_leaf = true;
  nodes_.push_back(std::move(n));
  Tensor t = value.detached();
  t.tape_ = this;
  t.node_ = size() - 1;
  return t;
}

Tensor Tape::emit(Shape s, std::vector<double> data, std::vector<i64> input_ids,
                  BackwardFn bw) {
  if (consumed_) throw ContractViolation("emit() on a consumed tape");
  for (i64 id : input_ids)
    if (id >= size()) throw ContractViolation("emit(): input id out of range");
  Tensor t = Tensor::from_data(s, std::move(data));
  Node n;
  n.shape = s;
  n.inputs = std::move(input_ids);
  n.bw = std::move(bw);
  nodes_.push_back(std::move(n));
  t.tape_ = this;
  t.node_ = size() - 1;
  return t;
}

std::span<double> Tape::grad_buffer(i64 node_id) {
  auto& g = grads_[static_cast<size_t>(node_id)];
  if (!g) {
    size_t n = static_cast<size_t>(nodes_[static_cast<size_t>(node_id)].shape.numel());
    g = std::make_unique<std::vector<double>>(n, 0.0);
  }
  return {g->data(), g->size()};
}

Gradients Tape::backward(const Tensor& root) {
  if (consumed_) throw ContractViolation("backward() on a consumed tape");
  if (root.tape() != this)
    throw ContractViolation("backward(): root not produced on this tape");
  if (root.numel() != 1)
    throw ContractViolation("backward(): root must be scalar, got " +
                            root.shape().str());
  consumed_ = true;
  grads_.resize(static_cast<size_t>(size()));
  grad_buffer(root.node())[0] = 1.0;

  for (i64 i = root.node(); i >= 0; --i) {
    auto& node = nodes_[static_cast<size_t>(i)];
    auto& g = grads_[static_cast<size_t>(i)];
    if (!g) continue;  // node does not contribute to the root
    if (!node.is_leaf) {
      GradSink sink(*this, node.inputs);
      node.bw({g->data(), g->size()}, sink);
      g.reset();  // free as soon as consumed
    }
  }

  Gradients out;
  for (i64 i = 0; i < size(); ++i) {
    auto& node = nodes_[static_cast<size_t>(i)];
    auto& g = grads_[static_cast<size_t>(i)];
    if (node.is_leaf && g) out.by_node_.emplace(i, std::move(*g));
  }
  grads_.clear();
  nodes_.clear();
  return out;
}

bool Gradients::contains(const Tensor& leaf) const {
  return by_node_.count(leaf.node()) > 0;
}

std::span<const double> Gradients::of(const Tensor& leaf) const {
  auto it = by_node_.find(leaf.node());
  if (it == by_node_.end())
    throw ContractViolation("Gradients::of(): no gradient recorded for node " +
                            std::to_string(leaf.node()));
  return {it->second.data(), it->second.size()};
}

}  // namespace pansharp::ad
