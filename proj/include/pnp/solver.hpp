#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <vector>

#include "pnp/denoiser.hpp"
#include "pnp/errors.hpp"
#include "pnp/imaging.hpp"

namespace pnp {

struct SolverConfig {
  double gamma = 1.0;          // gradient step; grad g is 1-Lipschitz under the unitary DFT
  double sigma = 5.0 / 255.0;  // passed to the denoiser unchanged
  std::size_t max_iters = 50;
  double tol = 0.0;            // stop once the relative change drops below tol
  bool accelerated = true;

  void validate() const;
};

struct TraceRecord {
  std::size_t k = 0;
  double rel_change = 0.0;
  double g_value = 0.0;
  std::optional<double> snr_db;
  double ms = 0.0;
};

struct SolverTrace {
  std::vector<TraceRecord> records;
};

/// Raised when an iterate stops being finite; carries the last finite iterate.
class SolverDivergenceError : public DivergenceError {
 public:
  SolverDivergenceError(const std::string& what, Image last) : DivergenceError(what), last_(std::move(last)) {}
  const Image& last_finite() const { return last_; }

 private:
  Image last_;
};

struct SolverResult {
  Image image;
  SolverTrace trace;
};

/// Momentum sequence q_k = (1 + sqrt(1 + 4 q_{k-1}^2)) / 2, defined for q >= 1.
double qk_next(double q_prev);

/// Plug-and-play accelerated proximal gradient:
///   z = s - gamma grad g(s);  x = D_sigma(z);  s = x + ((q_prev - 1)/q)(x - x_prev)
/// with s0 = x0 and q0 = 1. accelerated = false pins q to 1.
SolverResult pnp_apgm(const KSpaceMeasurement& y, const Image& x0, const Denoiser& denoiser,
                      const SolverConfig& cfg, const Image* reference = nullptr);

/// Re{idft2(y)}: the zero-filled inverse.
Image zero_filled(const KSpaceMeasurement& y);

/// CSV with header k,rel_change,g_value,snr_db,ms.
void write_trace_csv(const SolverTrace& trace, std::ostream& out);

}  // namespace pnp
