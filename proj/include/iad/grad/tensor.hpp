#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

namespace iad::grad {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

// One vertex of the dynamic computation graph. Leaves have no inputs; every
// other node owns references to its inputs, so the graph reachable from a
// tensor stays alive for as long as that tensor does.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until something accumulates into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  // Propagates this node's grad into its inputs' grads.
  std::function<void(Node&)> backward;
  const char* op = "leaf";

  std::vector<double>& ensure_grad();
};

}  // namespace detail

// Dense row-major tensor of 64-bit floats with optional gradient tracking.
//
// Tensors are cheap handles; copies alias the same storage. Operations in
// ops.hpp create new nodes that remember their inputs while gradient
// recording is enabled (see NoGradGuard).
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  // Direct write access; only meaningful for leaves (parameters, inputs).
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t flat_index) const { return data()[flat_index]; }

  bool requires_grad() const;
  bool is_leaf() const;
  bool has_grad() const;
  // Gradient accumulator. Empty span when nothing has been accumulated.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // New leaf holding a copy of the values, disconnected from any graph.
  Tensor detach() const;

  const detail::Node* id() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

bool grad_enabled();

// Disables graph recording on this thread for the guard's lifetime; used for
// rollout-time inference against a frozen parameter snapshot.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Leaves that received a gradient contribution during a backward pass.
class BackwardResult {
 public:
  bool reached(const Tensor& leaf) const { return leaves_.contains(leaf.id()); }
  std::size_t leaf_count() const { return leaves_.size(); }

 private:
  friend BackwardResult backward(const Tensor& loss);
  std::unordered_set<const detail::Node*> leaves_;
};

// Reverse-mode pass from a scalar loss. Gradients accumulate into every
// reachable leaf that requires grad. Interior gradients are cleared afterwards,
// so the graph stays reusable: a second call accumulates the same gradients
// again.
BackwardResult backward(const Tensor& loss);

}  // namespace iad::grad
