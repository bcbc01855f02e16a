#include "coirl/autodiff/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

namespace coirl {
inline namespace COIRL_PRECISION_NS {
namespace ad {
namespace {

thread_local bool g_grad_enabled = true;

}  // namespace

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

void Node::ensure_grad() {
  if (grad.empty()) grad.assign(value.size(), Real{0});
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), Real{0}, requires_grad); }

Tensor Tensor::full(Shape shape, Real value, bool requires_grad) {
  const auto n = shape_size(shape);
  return from(std::move(shape), std::vector<Real>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<Real> values, bool requires_grad) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one dimension");
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive: " + shape_str(shape));
  }
  if (shape_size(shape) != values.size()) {
    throw DimensionError("tensor data length " + std::to_string(values.size()) + " does not match shape " +
                         shape_str(shape));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(Real value, bool requires_grad) { return from({1}, {value}, requires_grad); }

Tensor Tensor::row(std::span<const Real> values, bool requires_grad) {
  return from({1, values.size()}, std::vector<Real>(values.begin(), values.end()), requires_grad);
}

std::size_t Tensor::rows() const { return rank() == 1 ? 1 : node_->shape[0]; }

std::size_t Tensor::cols() const { return rank() == 1 ? node_->shape[0] : size() / node_->shape[0]; }

std::span<Real> Tensor::mutable_grad() {
  node_->ensure_grad();
  return node_->grad;
}

Real Tensor::item() const {
  if (size() != 1) throw UsageError("item() on a tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

void Tensor::zero_grad() { node_->grad.clear(); }

Tensor Tensor::detach() const { return from(node_->shape, node_->value, false); }

Tensor Tensor::clone_leaf(bool requires_grad) const { return from(node_->shape, node_->value, requires_grad); }

ComputationTape::ComputationTape(const Tensor& root) : root_(root.node().get()) {
  // Iterative post-order DFS so deep graphs do not exhaust the stack.
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  if (root_->requires_grad) stack.emplace_back(root_, 0);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next == 0 && !visited.insert(node).second) {
      stack.pop_back();
      continue;
    }
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && !visited.contains(child)) stack.emplace_back(child, 0);
      continue;
    }
    order_.push_back(node);
    stack.pop_back();
  }
}

void ComputationTape::run_backward() {
  if (order_.empty()) return;
  root_->ensure_grad();
  root_->grad[0] += Real{1};
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    Node* node = *it;
    if (!node->backward_fn || node->grad.empty()) continue;
    node->backward_fn(*node);
  }
  for (Node* node : order_) {
    if (!node->inputs.empty()) continue;
    for (Real g : node->grad) {
      if (!std::isfinite(g)) throw NumericalError("non-finite gradient reached a leaf");
    }
  }
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw UsageError("backward() requires a scalar root, got " + (loss.defined() ? shape_str(loss.shape()) : "null"));
  }
  ComputationTape tape(loss);
  tape.run_backward();
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

}  // namespace ad
}  // namespace COIRL_PRECISION_NS
}  // namespace coirl
