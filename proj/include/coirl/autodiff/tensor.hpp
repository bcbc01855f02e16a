#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "coirl/errors.hpp"
#include "coirl/real.hpp"

namespace coirl {
inline namespace COIRL_PRECISION_NS {
namespace ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

// One recorded operation. Leaves have no inputs and no backward rule.
struct Node {
  Shape shape;
  std::vector<Real> value;
  std::vector<Real> grad;  // empty until a gradient reaches this node
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into the inputs' grads.
  std::function<void(Node&)> backward_fn;

  void ensure_grad();
};

// Handle to a dense row-major array that participates in reverse-mode
// differentiation. Copies share the underlying node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Real value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<Real> values, bool requires_grad = false);
  static Tensor scalar(Real value, bool requires_grad = false);
  static Tensor row(std::span<const Real> values, bool requires_grad = false);

  [[nodiscard]] bool defined() const { return node_ != nullptr; }
  [[nodiscard]] const Shape& shape() const { return node_->shape; }
  [[nodiscard]] std::size_t size() const { return node_->value.size(); }
  [[nodiscard]] std::size_t rank() const { return node_->shape.size(); }
  // Rank-2 accessors; a rank-1 tensor of length L is treated as 1 x L.
  [[nodiscard]] std::size_t rows() const;
  [[nodiscard]] std::size_t cols() const;

  [[nodiscard]] std::span<const Real> data() const { return node_->value; }
  // Direct write access; only meaningful on leaves (parameters, inputs).
  [[nodiscard]] std::span<Real> mutable_data() { return node_->value; }
  [[nodiscard]] std::span<const Real> grad() const { return node_->grad; }
  [[nodiscard]] std::span<Real> mutable_grad();
  [[nodiscard]] bool has_grad() const { return !node_->grad.empty(); }
  [[nodiscard]] bool requires_grad() const { return node_->requires_grad; }
  [[nodiscard]] bool is_leaf() const { return node_->inputs.empty(); }
  [[nodiscard]] const char* op() const { return node_->op; }

  [[nodiscard]] Real item() const;
  [[nodiscard]] Real at(std::size_t i) const { return node_->value[i]; }
  [[nodiscard]] Real at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }

  void zero_grad();
  // New leaf holding a copy of the values, cut from the graph.
  [[nodiscard]] Tensor detach() const;
  [[nodiscard]] Tensor clone_leaf(bool requires_grad) const;

  [[nodiscard]] const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Topologically ordered view of the graph reachable from a root, restricted to
// nodes that require gradients. Inputs always precede the nodes using them.
class ComputationTape {
 public:
  explicit ComputationTape(const Tensor& root);
  [[nodiscard]] const std::vector<Node*>& order() const { return order_; }

  // Seeds d(root)/d(root) = 1 and runs every backward rule once, in reverse order.
  void run_backward();

 private:
  std::vector<Node*> order_;
  Node* root_;
};

// Accumulates dLoss/dLeaf into every requires_grad leaf. Throws UsageError for a
// non-scalar root and NumericalError when a gradient is non-finite.
void backward(const Tensor& loss);

// While alive on a thread, ops on that thread record no graph.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

}  // namespace ad
}  // namespace COIRL_PRECISION_NS
}  // namespace coirl
