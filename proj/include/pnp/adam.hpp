#pragma once

#include <cstdint>
#include <vector>

#include "pnp/tensor.hpp"

namespace pnp::nn {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment estimates for one parameter tensor.
struct AdamState {
  std::uint64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;
  AdamHyper hyper;
};

/// One bias-corrected Adam update of `param` from `grad`.
/// Throws DivergenceError on a non-finite gradient, leaving param untouched.
void adam_step(Tensor& param, std::span<const double> grad, AdamState& state, double lr);

/// Adam over a fixed list of parameter tensors, using their tape gradients.
class Adam {
 public:
  explicit Adam(std::vector<Tensor> params, AdamHyper hyper = {});

  void step(double lr);
  void zero_grad();

  const std::vector<AdamState>& states() const { return states_; }

 private:
  std::vector<Tensor> params_;
  std::vector<AdamState> states_;
};

}  // namespace pnp::nn
