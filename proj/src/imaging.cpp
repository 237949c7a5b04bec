#include "pnp/imaging.hpp"

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <mutex>
#include <numbers>
#include <random>

#include "pnp/errors.hpp"

namespace pnp {

namespace {

std::mutex g_fftw_planner_mutex;

// Aligned scratch buffer owned for the duration of one transform; a fixed
// allocator keeps FFTW's codelet choice (and thus rounding) reproducible.
class FftwBuffer {
 public:
  explicit FftwBuffer(std::size_t n) : data_(fftw_alloc_complex(n)) {
    if (!data_) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(data_); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  fftw_complex* get() { return data_; }

 private:
  fftw_complex* data_;
};

ComplexField transform(const ComplexField& x, int sign) {
  if (x.rows < 1 || x.cols < 1) throw ShapeError("dft2 on empty field");
  const std::size_t n = x.rows * x.cols;
  FftwBuffer in(n), out(n);
  fftw_plan plan;
  {
    std::lock_guard lock(g_fftw_planner_mutex);
    plan = fftw_plan_dft_2d(static_cast<int>(x.rows), static_cast<int>(x.cols), in.get(), out.get(), sign,
                            FFTW_ESTIMATE);
  }
  for (std::size_t i = 0; i < n; ++i) {
    in.get()[i][0] = x.values[i].real();
    in.get()[i][1] = x.values[i].imag();
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(g_fftw_planner_mutex);
    fftw_destroy_plan(plan);
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  ComplexField y(x.rows, x.cols);
  for (std::size_t i = 0; i < n; ++i) y.values[i] = {out.get()[i][0] * scale, out.get()[i][1] * scale};
  return y;
}

void require_match(const SamplingMask& mask, std::size_t rows, std::size_t cols, const char* what) {
  if (mask.rows != rows || mask.cols != cols)
    throw ShapeError(std::string(what) + ": mask is " + std::to_string(mask.rows) + "x" + std::to_string(mask.cols) +
                     ", data is " + std::to_string(rows) + "x" + std::to_string(cols));
}

}  // namespace

std::size_t SamplingMask::count() const {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }));
}

SamplingMask SamplingMask::full(std::size_t rows, std::size_t cols) {
  SamplingMask m;
  m.rows = rows;
  m.cols = cols;
  m.bits.assign(rows * cols, 1);
  return m;
}

ComplexField dft2(const Image& x) {
  ComplexField c(x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i) c.values[i] = x.pixels[i];
  return transform(c, FFTW_FORWARD);
}

ComplexField dft2(const ComplexField& x) { return transform(x, FFTW_FORWARD); }

ComplexField idft2(const ComplexField& x) { return transform(x, FFTW_BACKWARD); }

Image real_part(const ComplexField& x) {
  Image img(x.rows, x.cols);
  for (std::size_t i = 0; i < img.size(); ++i) img.pixels[i] = x.values[i].real();
  return img;
}

SamplingMask radial_mask(std::size_t rows, std::size_t cols, std::size_t lines) {
  if (lines < 1) throw DomainError("radial_mask: need at least one line");
  if (rows < 2 || cols < 2) throw DomainError("radial_mask: image must be at least 2x2");
  SamplingMask mask;
  mask.rows = rows;
  mask.cols = cols;
  mask.line_count = lines;
  mask.bits.assign(rows * cols, 0);

  const auto cr = static_cast<long>(rows / 2);
  const auto cc = static_cast<long>(cols / 2);
  const auto reach = static_cast<long>(std::ceil(std::hypot(static_cast<double>(cr), static_cast<double>(cc)))) + 1;
  const auto h = static_cast<long>(rows), w = static_cast<long>(cols);
  for (std::size_t l = 0; l < lines; ++l) {
    const double theta = static_cast<double>(l) * std::numbers::pi / static_cast<double>(lines);
    const double ct = std::cos(theta), st = std::sin(theta);
    for (long r = -reach; r <= reach; ++r) {
      // Column offset follows cos, row offset follows sin: theta = 0 is the horizontal through DC.
      const long dc = std::lround(static_cast<double>(r) * ct);
      const long dr = std::lround(static_cast<double>(r) * st);
      const long pr = cr + dr, pc = cc + dc;
      if (pr < 0 || pr >= h || pc < 0 || pc >= w) continue;
      // Centred index -> unshifted index.
      const long ur = ((pr - cr) % h + h) % h;
      const long uc = ((pc - cc) % w + w) % w;
      mask.bits[static_cast<std::size_t>(ur * w + uc)] = 1;
    }
  }
  mask.bits[0] = 1;
  return mask;
}

ComplexField apply_mask(const ComplexField& field, const SamplingMask& mask) {
  require_match(mask, field.rows, field.cols, "apply_mask");
  ComplexField out = field;
  for (std::size_t i = 0; i < out.values.size(); ++i)
    if (!mask.bits[i]) out.values[i] = 0.0;
  return out;
}

KSpaceMeasurement measure(const Image& x, const SamplingMask& mask, double noise_sigma, std::uint64_t seed) {
  if (noise_sigma < 0.0) throw DomainError("measure: noise sigma must be nonnegative");
  require_match(mask, x.rows, x.cols, "measure");
  KSpaceMeasurement y{apply_mask(dft2(x), mask), mask};
  if (noise_sigma > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, noise_sigma);
    for (std::size_t i = 0; i < y.values.values.size(); ++i) {
      if (!mask.bits[i]) continue;
      const double re = normal(rng);
      const double im = normal(rng);
      y.values.values[i] += std::complex<double>(re, im);
    }
  }
  return y;
}

namespace {

ComplexField residual(const Image& x, const KSpaceMeasurement& y) {
  if (!(x.rows == y.values.rows && x.cols == y.values.cols))
    throw ShapeError("data fidelity: image and measurement dims differ");
  require_match(y.mask, x.rows, x.cols, "data fidelity");
  ComplexField r = apply_mask(dft2(x), y.mask);
  for (std::size_t i = 0; i < r.values.size(); ++i) r.values[i] -= y.values.values[i];
  return r;
}

}  // namespace

double data_fidelity(const Image& x, const KSpaceMeasurement& y) {
  const ComplexField r = residual(x, y);
  double s = 0.0;
  for (const auto& v : r.values) s += std::norm(v);
  return 0.5 * s;
}

Image data_fidelity_gradient(const Image& x, const KSpaceMeasurement& y) {
  ComplexField r = residual(x, y);
  // S^T re-embeds the sampled residual; the entries off the mask are already zero
  // when y respects its mask, but enforce it so the operator is exactly F^H S^T S.
  for (std::size_t i = 0; i < r.values.size(); ++i)
    if (!y.mask.bits[i]) r.values[i] = 0.0;
  return real_part(idft2(r));
}

Image shepp_logan(std::size_t n, PhantomContrast contrast) {
  if (n < 16) throw DomainError("shepp_logan: size must be at least 16");
  struct Ellipse {
    double a, b, x0, y0, phi_deg;
  };
  static constexpr std::array<Ellipse, 10> kEllipses{{
      {0.69, 0.92, 0.0, 0.0, 0.0},
      {0.6624, 0.8740, 0.0, -0.0184, 0.0},
      {0.1100, 0.3100, 0.22, 0.0, -18.0},
      {0.1600, 0.4100, -0.22, 0.0, 18.0},
      {0.2100, 0.2500, 0.0, 0.35, 0.0},
      {0.0460, 0.0460, 0.0, 0.1, 0.0},
      {0.0460, 0.0460, 0.0, -0.1, 0.0},
      {0.0460, 0.0230, -0.08, -0.605, 0.0},
      {0.0230, 0.0230, 0.0, -0.606, 0.0},
      {0.0230, 0.0460, 0.06, -0.605, 0.0},
  }};
  static constexpr std::array<double, 10> kOriginal{1.0, -0.98, -0.02, -0.02, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01};
  static constexpr std::array<double, 10> kModified{1.0, -0.8, -0.2, -0.2, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1};
  const auto& levels = contrast == PhantomContrast::Original ? kOriginal : kModified;
  Image img(n, n);
  const double nd = static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    const double y = (nd - 2.0 * static_cast<double>(r) - 1.0) / nd;
    for (std::size_t c = 0; c < n; ++c) {
      const double x = (2.0 * static_cast<double>(c) + 1.0 - nd) / nd;
      double v = 0.0;
      for (std::size_t i = 0; i < kEllipses.size(); ++i) {
        const Ellipse& e = kEllipses[i];
        const double phi = e.phi_deg * std::numbers::pi / 180.0;
        const double dx = x - e.x0, dy = y - e.y0;
        const double u = dx * std::cos(phi) + dy * std::sin(phi);
        const double t = -dx * std::sin(phi) + dy * std::cos(phi);
        if (u * u / (e.a * e.a) + t * t / (e.b * e.b) <= 1.0) v += levels[i];
      }
      img.at(r, c) = std::clamp(v, 0.0, 1.0);
    }
  }
  return img;
}

double l2_norm(const Image& x) {
  double s = 0.0;
  for (double v : x.pixels) s += v * v;
  return std::sqrt(s);
}

double snr_db(const Image& x, const Image& ref) {
  if (!x.same_dims(ref)) throw ShapeError("snr_db: dims differ");
  const double rn = l2_norm(ref);
  if (!(rn > 0.0)) throw DomainError("snr_db: reference has zero norm");
  double e = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x.pixels[i] - ref.pixels[i];
    e += d * d;
  }
  if (e == 0.0) return kSnrCapDb;
  return std::min(kSnrCapDb, 20.0 * std::log10(rn / std::sqrt(e)));
}

double psnr_db(const Image& x, const Image& ref, double peak) {
  if (!x.same_dims(ref)) throw ShapeError("psnr_db: dims differ");
  double e = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x.pixels[i] - ref.pixels[i];
    e += d * d;
  }
  if (e == 0.0) return kSnrCapDb;
  const double mse = e / static_cast<double>(x.size());
  return std::min(kSnrCapDb, 10.0 * std::log10(peak * peak / mse));
}

}  // namespace pnp
