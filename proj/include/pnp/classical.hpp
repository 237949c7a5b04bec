#pragma once

#include <cstddef>

#include "pnp/denoiser.hpp"

namespace pnp {

struct TvConfig {
  double lambda_scale = 1.0;  // lambda = lambda_scale * sigma
  std::size_t inner_iters = 50;
  double dual_step = 0.248;  // must lie in (0, 0.25]

  void validate() const;
};

/// Isotropic total variation with forward differences (zero at the far edge).
double total_variation(const Image& u);

/// Approximate prox of lambda*TV_iso via the projected dual fixed-point
/// iteration, run for exactly cfg.inner_iters steps from a zero dual.
Image tv_denoise(const Image& z, double sigma, const TvConfig& cfg = {});

/// Truncated Gaussian blur with reflective boundary; std is 1 px at sigma = 5/255
/// and scales linearly with sigma.
Image gaussian_denoise(const Image& z, double sigma);

class IdentityDenoiser final : public Denoiser {
 public:
  std::string name() const override { return "identity"; }
  Image apply(const Image& z, double) const override { return z; }
};

class GaussianDenoiser final : public Denoiser {
 public:
  std::string name() const override { return "gauss"; }
  Image apply(const Image& z, double sigma) const override { return gaussian_denoise(z, sigma); }
};

class TvDenoiser final : public Denoiser {
 public:
  explicit TvDenoiser(TvConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }
  std::string name() const override { return "tv"; }
  Image apply(const Image& z, double sigma) const override { return tv_denoise(z, sigma, cfg_); }

 private:
  TvConfig cfg_;
};

}  // namespace pnp
