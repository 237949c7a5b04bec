#pragma once

#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "pnp/denoiser.hpp"
#include "pnp/imaging.hpp"
#include "pnp/persistence.hpp"
#include "pnp/solver.hpp"
#include "pnp/training.hpp"

namespace pnp::cli {

void register_commands(CLI::App& app);
int run_selected(const CLI::App& app);

/// Per-method solver settings; zf ignores them.
struct MethodSettings {
  double gamma = 1.0;
  double sigma = 5.0 / 255.0;
  std::size_t iters = 50;
  double lambda_scale = 1.0;      // tv only
  std::filesystem::path weights;  // mssn / ssn only
};

struct BenchmarkConfig {
  std::size_t size = 128;
  std::vector<std::string> phantoms{"original", "modified"};
  std::vector<std::size_t> lines{36, 48};
  std::vector<std::string> methods{"zf", "gauss", "tv"};
  double noise = 0.0;  // k-space noise std per real/imag part
  std::uint64_t seed = 0;
  std::map<std::string, MethodSettings> settings;

  static BenchmarkConfig from_kv(const io::KeyValueConfig& kv, const std::filesystem::path& base_dir);
  MethodSettings for_method(const std::string& method) const;
};

struct BenchmarkRow {
  std::string method;
  std::size_t lines = 0;
  double sampling_ratio = 0.0;
  std::vector<double> snr_db;  // one per phantom
  double mean_snr_db = 0.0;
};

std::vector<BenchmarkRow> run_benchmark(const BenchmarkConfig& cfg);
void write_benchmark_csv(const BenchmarkConfig& cfg, const std::vector<BenchmarkRow>& rows, std::ostream& out);

Image make_phantom(const std::string& name, std::size_t size);

/// identity | gauss | tv | mssn | ssn. Network denoisers need a weights file of the matching variant.
std::unique_ptr<Denoiser> make_denoiser(const std::string& name, const std::filesystem::path& weights,
                                        double tv_lambda_scale = 1.0);

/// Training recipe plus network shape from a key-value file; absent keys keep desk defaults.
struct TrainSetup {
  train::TrainConfig train;
  mssn::MssnConfig net;
};
TrainSetup train_setup_from_kv(const io::KeyValueConfig& kv);

}  // namespace pnp::cli
