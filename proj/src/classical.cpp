#include "pnp/classical.hpp"

#include <cmath>
#include <vector>

#include "pnp/errors.hpp"

namespace pnp {

void TvConfig::validate() const {
  if (!(lambda_scale > 0.0)) throw DomainError("tv: lambda_scale must be positive");
  if (inner_iters < 1) throw DomainError("tv: inner_iters must be at least 1");
  if (!(dual_step > 0.0 && dual_step <= 0.25)) throw DomainError("tv: dual_step must lie in (0, 0.25]");
}

namespace {

void forward_gradient(const Image& u, std::vector<double>& gx, std::vector<double>& gy) {
  const std::size_t h = u.rows, w = u.cols;
  gx.assign(h * w, 0.0);
  gy.assign(h * w, 0.0);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t i = r * w + c;
      if (c + 1 < w) gx[i] = u.pixels[i + 1] - u.pixels[i];
      if (r + 1 < h) gy[i] = u.pixels[i + w] - u.pixels[i];
    }
}

// Negative adjoint of forward_gradient.
void divergence(const std::vector<double>& px, const std::vector<double>& py, std::size_t h, std::size_t w,
                Image& out) {
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t i = r * w + c;
      double d = 0.0;
      if (c + 1 < w) d += px[i];
      if (c > 0) d -= px[i - 1];
      if (r + 1 < h) d += py[i];
      if (r > 0) d -= py[i - w];
      out.pixels[i] = d;
    }
}

}  // namespace

double total_variation(const Image& u) {
  std::vector<double> gx, gy;
  forward_gradient(u, gx, gy);
  double tv = 0.0;
  for (std::size_t i = 0; i < gx.size(); ++i) tv += std::sqrt(gx[i] * gx[i] + gy[i] * gy[i]);
  return tv;
}

Image tv_denoise(const Image& z, double sigma, const TvConfig& cfg) {
  if (sigma < 0.0) throw DomainError("tv_denoise: sigma must be nonnegative");
  cfg.validate();
  const double lambda = cfg.lambda_scale * sigma;
  if (lambda == 0.0) return z;

  const std::size_t h = z.rows, w = z.cols, n = z.size();
  std::vector<double> px(n, 0.0), py(n, 0.0), gx, gy;
  Image div(h, w), work(h, w);
  const double tau = cfg.dual_step;
  for (std::size_t it = 0; it < cfg.inner_iters; ++it) {
    divergence(px, py, h, w, div);
    for (std::size_t i = 0; i < n; ++i) work.pixels[i] = div.pixels[i] - z.pixels[i] / lambda;
    forward_gradient(work, gx, gy);
    for (std::size_t i = 0; i < n; ++i) {
      const double mag = std::sqrt(gx[i] * gx[i] + gy[i] * gy[i]);
      const double denom = 1.0 + tau * mag;
      px[i] = (px[i] + tau * gx[i]) / denom;
      py[i] = (py[i] + tau * gy[i]) / denom;
    }
  }
  divergence(px, py, h, w, div);
  Image u(h, w);
  for (std::size_t i = 0; i < n; ++i) u.pixels[i] = z.pixels[i] - lambda * div.pixels[i];
  return u;
}

namespace {

std::size_t reflect(std::ptrdiff_t i, std::ptrdiff_t n) {
  // Half-sample symmetric extension: ... b a | a b c ... c b a | a b ...
  const std::ptrdiff_t period = 2 * n;
  std::ptrdiff_t m = ((i % period) + period) % period;
  if (m >= n) m = period - 1 - m;
  return static_cast<std::size_t>(m);
}

}  // namespace

Image gaussian_denoise(const Image& z, double sigma) {
  if (sigma < 0.0) throw DomainError("gaussian_denoise: sigma must be nonnegative");
  if (sigma == 0.0) return z;
  const double std_px = sigma / (5.0 / 255.0);
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * std_px));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
    const double v = std::exp(-static_cast<double>(k * k) / (2.0 * std_px * std_px));
    kernel[static_cast<std::size_t>(k + radius)] = v;
    total += v;
  }
  for (auto& v : kernel) v /= total;

  const auto h = static_cast<std::ptrdiff_t>(z.rows), w = static_cast<std::ptrdiff_t>(z.cols);
  Image tmp(z.rows, z.cols), out(z.rows, z.cols);
  for (std::ptrdiff_t r = 0; r < h; ++r)
    for (std::ptrdiff_t c = 0; c < w; ++c) {
      double acc = 0.0;
      for (std::ptrdiff_t k = -radius; k <= radius; ++k)
        acc += kernel[static_cast<std::size_t>(k + radius)] * z.at(static_cast<std::size_t>(r), reflect(c + k, w));
      tmp.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = acc;
    }
  for (std::ptrdiff_t r = 0; r < h; ++r)
    for (std::ptrdiff_t c = 0; c < w; ++c) {
      double acc = 0.0;
      for (std::ptrdiff_t k = -radius; k <= radius; ++k)
        acc += kernel[static_cast<std::size_t>(k + radius)] * tmp.at(reflect(r + k, h), static_cast<std::size_t>(c));
      out.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = acc;
    }
  return out;
}

}  // namespace pnp
