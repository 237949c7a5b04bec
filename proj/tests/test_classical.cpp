#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "pnp/classical.hpp"
#include "pnp/errors.hpp"

using namespace pnp;

namespace {

double tv_objective(const Image& u, const Image& z, double lambda) {
  double fit = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) fit += 0.5 * (u.pixels[i] - z.pixels[i]) * (u.pixels[i] - z.pixels[i]);
  return fit + lambda * total_variation(u);
}

// Isotropic TV written directly from its definition, for checking total_variation.
double tv_by_hand(const Image& u) {
  double s = 0.0;
  for (std::size_t r = 0; r < u.rows; ++r)
    for (std::size_t c = 0; c < u.cols; ++c) {
      const double dx = c + 1 < u.cols ? u.at(r, c + 1) - u.at(r, c) : 0.0;
      const double dy = r + 1 < u.rows ? u.at(r + 1, c) - u.at(r, c) : 0.0;
      s += std::hypot(dx, dy);
    }
  return s;
}

// Best objective over `steps` subgradient steps from z with step 0.5/sqrt(k+1).
double subgradient_best(const Image& z, double lambda, int steps) {
  Image u = z;
  double best = tv_objective(u, z, lambda);
  const std::size_t h = z.rows, w = z.cols;
  for (int k = 0; k < steps; ++k) {
    Image g(h, w);
    for (std::size_t i = 0; i < u.size(); ++i) g.pixels[i] = u.pixels[i] - z.pixels[i];
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c) {
        const double dx = c + 1 < w ? u.at(r, c + 1) - u.at(r, c) : 0.0;
        const double dy = r + 1 < h ? u.at(r + 1, c) - u.at(r, c) : 0.0;
        const double mag = std::hypot(dx, dy);
        if (mag == 0.0) continue;
        const double ax = lambda * dx / mag, ay = lambda * dy / mag;
        if (c + 1 < w) {
          g.at(r, c + 1) += ax;
          g.at(r, c) -= ax;
        }
        if (r + 1 < h) {
          g.at(r + 1, c) += ay;
          g.at(r, c) -= ay;
        }
      }
    const double t = 0.5 / std::sqrt(static_cast<double>(k) + 1.0);
    for (std::size_t i = 0; i < u.size(); ++i) u.pixels[i] -= t * g.pixels[i];
    best = std::min(best, tv_objective(u, z, lambda));
  }
  return best;
}

double variance(const Image& x) {
  double m = 0.0;
  for (double v : x.pixels) m += v;
  m /= static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x.pixels) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size());
}

}  // namespace

TEST_CASE("total variation matches its definition") {
  std::mt19937_64 rng(1);
  const Image u = oracle::random_image(9, 7, rng);
  CHECK(total_variation(u) == doctest::Approx(tv_by_hand(u)).epsilon(1e-13));
  CHECK(total_variation(Image(5, 5, 0.3)) == 0.0);
}

TEST_CASE("tv denoise examples") {
  const Image flat(12, 10, 0.42);
  const Image out = tv_denoise(flat, 0.1);
  CHECK(oracle::max_abs_diff(out.pixels, flat.pixels) < 1e-15);

  std::mt19937_64 rng(2);
  const Image z = oracle::random_image(16, 16, rng);
  CHECK(tv_denoise(z, 0.0) == z);
  CHECK_THROWS_AS(tv_denoise(z, -0.1), DomainError);
  TvConfig bad;
  bad.dual_step = 0.3;
  CHECK_THROWS_AS(tv_denoise(z, 0.1, bad), DomainError);
}

TEST_CASE("tv denoise beats the input and a subgradient oracle") {
  std::mt19937_64 rng(3);
  for (double sigma : {0.05, 0.1, 0.3}) {
    const Image z = oracle::random_image(16, 16, rng);
    const double lambda = sigma;  // default lambda_scale = 1
    const Image u = tv_denoise(z, sigma);
    const double f_out = tv_objective(u, z, lambda);
    CHECK(f_out <= tv_objective(z, z, lambda));
    CHECK(f_out <= 1.01 * subgradient_best(z, lambda, 200));
  }
}

TEST_CASE("tv denoise is nonexpansive on random pairs") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const Image a = oracle::random_image(16, 16, rng), b = oracle::random_image(16, 16, rng);
    const Image da = tv_denoise(a, 0.1), db = tv_denoise(b, 0.1);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      num += (da.pixels[i] - db.pixels[i]) * (da.pixels[i] - db.pixels[i]);
      den += (a.pixels[i] - b.pixels[i]) * (a.pixels[i] - b.pixels[i]);
    }
    CHECK(std::sqrt(num) <= std::sqrt(den) + 1e-6);
  }
}

TEST_CASE("identity denoiser") {
  std::mt19937_64 rng(5);
  const IdentityDenoiser id;
  const Image z = oracle::random_image(5, 9, rng);
  CHECK(id.apply(z, 0.3) == z);
  CHECK(id.apply(id.apply(z, 0.1), 0.1) == z);
  CHECK(id.apply(z, 0.0).rows == 5);
  CHECK(id.apply(z, 0.0).cols == 9);
  CHECK(id.name() == "identity");
}

TEST_CASE("gaussian denoiser examples") {
  std::mt19937_64 rng(6);
  const Image z = oracle::random_image(11, 13, rng);
  CHECK(gaussian_denoise(z, 0.0) == z);
  const Image flat(11, 13, 0.6);
  CHECK(oracle::max_abs_diff(gaussian_denoise(flat, 0.05).pixels, flat.pixels) < 1e-14);
  CHECK_THROWS_AS(gaussian_denoise(z, -1.0), DomainError);
}

TEST_CASE("gaussian kernel has unit std at sigma 5/255 and radius 3") {
  Image delta(21, 21);
  delta.at(10, 10) = 1.0;
  const Image k = gaussian_denoise(delta, 5.0 / 255.0);
  double z1 = 0.0;
  for (int d = -3; d <= 3; ++d) z1 += std::exp(-0.5 * d * d);
  for (int dr = -5; dr <= 5; ++dr)
    for (int dc = -5; dc <= 5; ++dc) {
      const double expect = (std::abs(dr) <= 3 && std::abs(dc) <= 3)
                                ? std::exp(-0.5 * (dr * dr + dc * dc)) / (z1 * z1)
                                : 0.0;
      CHECK(k.at(static_cast<std::size_t>(10 + dr), static_cast<std::size_t>(10 + dc)) ==
            doctest::Approx(expect).epsilon(1e-12).scale(1e-16));
    }

  // Twice the sigma doubles the std: radius becomes 6.
  const Image wide = gaussian_denoise(delta, 10.0 / 255.0);
  double z2 = 0.0;
  for (int d = -6; d <= 6; ++d) z2 += std::exp(-0.5 * d * d / 4.0);
  CHECK(wide.at(10, 16) == doctest::Approx(std::exp(-0.5 * 36 / 4.0) / (z2 * z2)).epsilon(1e-12));
  CHECK(wide.at(10, 17) == 0.0);
}

TEST_CASE("gaussian denoiser uses reflective boundaries") {
  // Half-sample reflection makes the smoothing matrix symmetric, so the
  // column sums equal the row sums and a corner impulse keeps its mass.
  Image delta(9, 9);
  delta.at(0, 0) = 1.0;
  const Image k = gaussian_denoise(delta, 5.0 / 255.0);
  double total = 0.0;
  for (double v : k.pixels) total += v;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));  // mass is reflected back, not lost
}

TEST_CASE("gaussian denoiser reduces white-noise variance and is linear") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int draw = 0; draw < 100; ++draw) {
    Image x(24, 24);
    for (auto& v : x.pixels) v = n(rng);
    CHECK(variance(gaussian_denoise(x, 5.0 / 255.0)) < variance(x));
  }
  const Image a = oracle::random_image(16, 12, rng, -1, 1), b = oracle::random_image(16, 12, rng, -1, 1);
  Image mix(16, 12);
  for (std::size_t i = 0; i < mix.size(); ++i) mix.pixels[i] = 2.5 * a.pixels[i] - 0.75 * b.pixels[i];
  const Image lhs = gaussian_denoise(mix, 0.03);
  const Image da = gaussian_denoise(a, 0.03), db = gaussian_denoise(b, 0.03);
  for (std::size_t i = 0; i < mix.size(); ++i)
    CHECK(std::abs(lhs.pixels[i] - (2.5 * da.pixels[i] - 0.75 * db.pixels[i])) < 1e-9);
}

TEST_CASE("plugins preserve dims and finiteness") {
  std::mt19937_64 rng(8);
  const Image z = oracle::random_image(7, 19, rng);
  const GaussianDenoiser g;
  const TvDenoiser tv;
  for (const Denoiser* d : {static_cast<const Denoiser*>(&g), static_cast<const Denoiser*>(&tv)}) {
    const Image out = d->apply(z, 0.05);
    CHECK(out.same_dims(z));
    for (double v : out.pixels) CHECK(std::isfinite(v));
  }
  CHECK(g.name() == "gauss");
  CHECK(tv.name() == "tv");
}
