#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pnp/tensor.hpp"

namespace pnp::nn {

// Raw kernels, exposed for reuse by non-taped code paths.
// C[m x n] (+)= A[m x k] * B[k x n], all row-major and contiguous.
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
             bool accumulate);
// C[m x n] (+)= A^T * B with A stored [k x m].
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
             bool accumulate);
// C[m x n] (+)= A * B^T with B stored [n x k].
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
             bool accumulate);

// ---- elementwise / structural ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor relu(const Tensor& x);
Tensor reshape(const Tensor& x, Shape dims);
Tensor transpose(const Tensor& x);  // rank 2 only
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor stack(std::span<const Tensor> parts);  // new leading axis
Tensor select(const Tensor& x, std::size_t index);  // x[index, ...]

// ---- reductions / losses ----
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor mse_loss(const Tensor& prediction, const Tensor& target);
/// sum(x * w) for a constant weight tensor; handy for gradient probes.
Tensor weighted_sum(const Tensor& x, const Tensor& w);

// ---- dense algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);
/// Row-wise softmax over the last axis of a rank-2 tensor, max-subtracted.
Tensor softmax_rows(const Tensor& scores);

// ---- convolution ----
/// Same-size 2-D convolution (cross-correlation). input is [C,H,W] or
/// [N,C,H,W]; kernels are [C_out,C_in,k,k] with k in {1,3}; bias [C_out].
Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias);

// ---- batch normalization ----
enum class Mode { Train, Infer };

struct BatchNormStats {
  Tensor running_mean;
  Tensor running_var;
};

struct BatchNormOptions {
  double momentum = 0.9;  // weight kept by the running statistics
  double eps = 1e-5;
};

/// Per-channel normalization of [N,C,H,W] (or [C,H,W], treated as N=1).
/// Train mode uses population batch statistics and updates `stats`.
Tensor batchnorm(const Tensor& input, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats, Mode mode,
                 const BatchNormOptions& options = {});

}  // namespace pnp::nn
