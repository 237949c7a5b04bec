#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace pnp {

/// Real-valued grayscale image, row-major.
struct Image {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), pixels(r * c, fill) {}

  std::size_t size() const { return pixels.size(); }
  double& at(std::size_t r, std::size_t c) { return pixels[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return pixels[r * cols + c]; }
  bool same_dims(const Image& o) const { return rows == o.rows && cols == o.cols; }
  bool operator==(const Image&) const = default;
};

/// Complex 2-D array; std::complex<double> storage is interleaved (re, im).
struct ComplexField {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::complex<double>> values;

  ComplexField() = default;
  ComplexField(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c) {}

  std::complex<double>& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  const std::complex<double>& at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  bool operator==(const ComplexField&) const = default;
};

/// Binary k-space sampling pattern in the unshifted convention (DC at (0,0)).
/// line_count is 0 for masks that were not produced by radial_mask().
struct SamplingMask {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t line_count = 0;
  std::vector<std::uint8_t> bits;

  bool sampled(std::size_t r, std::size_t c) const { return bits[r * cols + c] != 0; }
  std::size_t count() const;
  double ratio() const { return static_cast<double>(count()) / static_cast<double>(bits.size()); }
  bool operator==(const SamplingMask&) const = default;

  static SamplingMask full(std::size_t rows, std::size_t cols);
};

/// The pair (y, S) of the single-coil measurement model y = S F x.
struct KSpaceMeasurement {
  ComplexField values;
  SamplingMask mask;
};

// ---- Fourier transform (unitary, 1/sqrt(HW) in both directions) ----
ComplexField dft2(const Image& x);
ComplexField dft2(const ComplexField& x);
ComplexField idft2(const ComplexField& x);
Image real_part(const ComplexField& x);

// ---- sampling ----

/// Radial lines at angles l*pi/L through the spectrum centre, rasterized by
/// nearest-neighbour rounding at unit radial steps, stored unshifted.
SamplingMask radial_mask(std::size_t rows, std::size_t cols, std::size_t lines);

/// Zeroes every unsampled entry.
ComplexField apply_mask(const ComplexField& field, const SamplingMask& mask);

/// y = S F x plus complex Gaussian noise (std noise_sigma per component) on sampled entries.
KSpaceMeasurement measure(const Image& x, const SamplingMask& mask, double noise_sigma, std::uint64_t seed);

// ---- data fidelity g(x) = 1/2 ||y - S F x||^2 ----
double data_fidelity(const Image& x, const KSpaceMeasurement& y);
/// Re{F^H S^T (S F x - y)}.
Image data_fidelity_gradient(const Image& x, const KSpaceMeasurement& y);

// ---- phantoms and metrics ----

enum class PhantomContrast {
  Original,  // the classic 10-ellipse intensity table
  Modified,  // higher-contrast table with the same geometry
};

/// 10-ellipse Shepp-Logan phantom on an N x N grid, clipped to [0, 1].
Image shepp_logan(std::size_t n, PhantomContrast contrast = PhantomContrast::Original);

inline constexpr double kSnrCapDb = 300.0;

/// 20 log10(||ref|| / ||x - ref||), capped at kSnrCapDb.
double snr_db(const Image& x, const Image& ref);
/// 10 log10(peak^2 / MSE), capped at kSnrCapDb.
double psnr_db(const Image& x, const Image& ref, double peak = 1.0);

double l2_norm(const Image& x);

}  // namespace pnp
