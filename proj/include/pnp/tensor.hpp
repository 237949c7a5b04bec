#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace pnp::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& dims);
std::string shape_string(const Shape& dims);

namespace detail {

// One vertex of the differentiation tape. `backward` reads `grad` and
// accumulates into the grads of `inputs`; leaves have no backward function.
struct Node {
  Shape dims;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  void ensure_grad();
};

}  // namespace detail

/// Dense row-major tensor of doubles with an optional tape node.
///
/// Tensor is a handle: copies share storage and gradient. Use clone() or
/// detach() for an independent copy.
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape dims, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape dims, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double v, bool requires_grad = false);

  const Shape& dims() const { return node_->dims; }
  std::size_t dim(std::size_t axis) const { return node_->dims.at(axis); }
  std::size_t rank() const { return node_->dims.size(); }
  std::size_t size() const { return node_->value.size(); }
  bool empty() const { return node_->value.empty(); }

  std::span<double> data() { return node_->value; }
  std::span<const double> data() const { return node_->value; }
  double& operator[](std::size_t i) { return node_->value[i]; }
  double operator[](std::size_t i) const { return node_->value[i]; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad();
  void zero_grad();

  bool all_finite() const;

  Tensor detach() const;
  Tensor clone() const;

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  // Tape plumbing for op implementations.
  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Reverse-mode sweep from a scalar loss. Leaf gradients accumulate across
/// calls until zero_grad(); interior gradients are recomputed on every call.
void backward(const Tensor& loss);

bool grad_enabled();

/// Disables tape recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace pnp::nn
