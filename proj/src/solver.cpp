#include "pnp/solver.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>

#include "pnp/errors.hpp"

namespace pnp {

void SolverConfig::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw DomainError("solver: gamma must be finite and nonnegative");
  if (!(sigma >= 0.0)) throw DomainError("solver: sigma must be nonnegative");
  if (max_iters < 1) throw DomainError("solver: max_iters must be at least 1");
  if (!(tol >= 0.0)) throw DomainError("solver: tol must be nonnegative");
}

double qk_next(double q_prev) {
  if (!(q_prev >= 1.0)) throw DomainError("qk_next: q must be at least 1");
  return 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * q_prev * q_prev));
}

Image zero_filled(const KSpaceMeasurement& y) { return real_part(idft2(y.values)); }

namespace {

bool finite(const Image& x) {
  for (double v : x.pixels)
    if (!std::isfinite(v)) return false;
  return true;
}

double diff_norm(const Image& a, const Image& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.pixels[i] - b.pixels[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

SolverResult pnp_apgm(const KSpaceMeasurement& y, const Image& x0, const Denoiser& denoiser,
                      const SolverConfig& cfg, const Image* reference) {
  cfg.validate();
  if (x0.rows != y.mask.rows || x0.cols != y.mask.cols) throw ShapeError("pnp_apgm: x0 dims do not match the mask");
  if (reference && !reference->same_dims(x0)) throw ShapeError("pnp_apgm: reference dims do not match x0");

  using clock = std::chrono::steady_clock;
  SolverResult result;
  Image x_prev = x0;
  Image s = x0;
  double q_prev = 1.0;

  for (std::size_t k = 1; k <= cfg.max_iters; ++k) {
    const auto t0 = clock::now();
    const Image grad = data_fidelity_gradient(s, y);
    Image z(s.rows, s.cols);
    for (std::size_t i = 0; i < z.size(); ++i) z.pixels[i] = s.pixels[i] - cfg.gamma * grad.pixels[i];

    Image x = denoiser.apply(z, cfg.sigma);
    if (!x.same_dims(z))
      throw ContractError("denoiser '" + denoiser.name() + "' changed the image dims");
    if (!finite(x)) {
      throw SolverDivergenceError("pnp_apgm: non-finite iterate at k=" + std::to_string(k), x_prev);
    }

    const double q = cfg.accelerated ? qk_next(q_prev) : 1.0;
    const double momentum = (q_prev - 1.0) / q;
    for (std::size_t i = 0; i < s.size(); ++i) s.pixels[i] = x.pixels[i] + momentum * (x.pixels[i] - x_prev.pixels[i]);
    q_prev = q;

    TraceRecord rec;
    rec.k = k;
    const double prev_norm = l2_norm(x_prev);
    const double change = diff_norm(x, x_prev);
    // With a zero previous iterate the absolute change is reported instead.
    rec.rel_change = prev_norm > 0.0 ? change / prev_norm : change;
    rec.g_value = data_fidelity(x, y);
    if (reference) rec.snr_db = snr_db(x, *reference);
    rec.ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    result.trace.records.push_back(rec);

    x_prev = std::move(x);
    if (rec.rel_change < cfg.tol) break;
  }
  result.image = std::move(x_prev);
  return result;
}

void write_trace_csv(const SolverTrace& trace, std::ostream& out) {
  out << "k,rel_change,g_value,snr_db,ms\n";
  out << std::setprecision(17);
  for (const auto& r : trace.records) {
    out << r.k << ',' << r.rel_change << ',' << r.g_value << ',';
    if (r.snr_db) out << *r.snr_db;
    out << ',' << std::setprecision(6) << r.ms << std::setprecision(17) << '\n';
  }
}

}  // namespace pnp
