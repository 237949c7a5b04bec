#include "pnp/adam.hpp"

#include <cmath>

#include "pnp/errors.hpp"

namespace pnp::nn {

void adam_step(Tensor& param, std::span<const double> grad, AdamState& state, double lr) {
  if (!(lr > 0.0)) throw DomainError("adam: learning rate must be positive");
  if (grad.size() != param.size()) throw ShapeError("adam: gradient size does not match parameter");
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!std::isfinite(grad[i]))
      throw DivergenceError("adam: non-finite gradient at index " + std::to_string(i) + " of parameter " +
                            shape_string(param.dims()));
  if (state.m.empty()) {
    state.m.assign(param.size(), 0.0);
    state.v.assign(param.size(), 0.0);
  }
  if (state.m.size() != param.size()) throw ShapeError("adam: state does not match parameter");

  state.step += 1;
  const auto& hp = state.hyper;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(hp.beta1, t);
  const double c2 = 1.0 - std::pow(hp.beta2, t);
  auto p = param.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    state.m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * grad[i];
    state.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + hp.epsilon);
  }
}

Adam::Adam(std::vector<Tensor> params, AdamHyper hyper) : params_(std::move(params)), states_(params_.size()) {
  for (auto& s : states_) s.hyper = hyper;
}

void Adam::step(double lr) {
  // Validate every gradient first so a failure leaves all parameters untouched.
  for (auto& p : params_)
    for (double g : p.grad())
      if (!std::isfinite(g)) throw DivergenceError("adam: non-finite gradient in parameter " + shape_string(p.dims()));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (!p.has_grad()) p.mutable_grad();
    adam_step(p, p.grad(), states_[i], lr);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace pnp::nn
