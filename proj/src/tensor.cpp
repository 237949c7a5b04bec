#include "pnp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "pnp/errors.hpp"

namespace pnp::nn {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t shape_size(const Shape& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& dims) {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(dims[i]);
  }
  return s + "]";
}

void detail::Node::ensure_grad() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
}

Tensor::Tensor() : node_(std::make_shared<detail::Node>()) { node_->dims = {0}; }

Tensor::Tensor(Shape dims, double fill, bool requires_grad) : node_(std::make_shared<detail::Node>()) {
  for (auto d : dims)
    if (d == 0) throw ShapeError("tensor dims must be positive: " + shape_string(dims));
  node_->value.assign(shape_size(dims), fill);
  node_->dims = std::move(dims);
  node_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape dims, std::vector<double> values, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
  for (auto d : dims)
    if (d == 0) throw ShapeError("tensor dims must be positive: " + shape_string(dims));
  if (shape_size(dims) != values.size())
    throw ShapeError("value count " + std::to_string(values.size()) + " does not match " + shape_string(dims));
  node_->dims = std::move(dims);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double v, bool requires_grad) { return Tensor({1}, v, requires_grad); }

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(dims()));
  return node_->value[0];
}

std::span<double> Tensor::mutable_grad() {
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

bool Tensor::all_finite() const {
  return std::all_of(node_->value.begin(), node_->value.end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::detach() const { return Tensor(dims(), node_->value, false); }

Tensor Tensor::clone() const { return Tensor(dims(), node_->value, requires_grad()); }

void backward(const Tensor& loss) {
  const auto& root = loss.node();
  if (!root->requires_grad) throw UsageError("backward() on a tensor that is not part of a recorded graph");
  if (root->value.size() != 1) throw ShapeError("backward() requires a scalar loss, got " + shape_string(root->dims));

  // Iterative post-order DFS gives a topological order (inputs before users).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{root.get(), 0}};
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (auto* n : order) {
    if (n->backward) n->grad.assign(n->value.size(), 0.0);
    else n->ensure_grad();
  }
  root->grad[0] += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

}  // namespace pnp::nn
