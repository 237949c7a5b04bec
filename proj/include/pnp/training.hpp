#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "pnp/imaging.hpp"
#include "pnp/mssn.hpp"

namespace pnp::train {

/// Training recipe. Defaults are the desk-scale values; the full scale uses
/// 42x42 patches, 80 epochs, and the same sigma / learning-rate schedule.
struct TrainConfig {
  std::size_t patch = 16;
  std::size_t stride = 8;
  double sigma = 5.0 / 255.0;  // noise std on [0,1]-normalized images
  std::size_t epochs = 12;
  std::size_t batch = 16;
  double lr0 = 1e-3;
  std::uint64_t halving_period = 50000;  // optimizer iterations
  std::uint64_t seed = 0;

  void validate() const;
};

/// Row-major P x P patches with offsets {0, s, 2s, ...} plus right/bottom-flush ones.
std::vector<Image> extract_patches(const Image& image, std::size_t patch, std::size_t stride);

struct NoisySample {
  Image noisy;
  Image noise;  // noisy == clean + noise elementwise
};

NoisySample add_noise(const Image& clean, double sigma, std::uint64_t seed);

/// lr0 * 0.5^floor(iteration / halving_period).
double lr_at(std::uint64_t iteration, const TrainConfig& cfg);

/// Deterministic 64-bit mixing of (seed, a, b) for per-sample generator seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

/// Piecewise-smooth image: random ellipses over a gentle intensity ramp, clipped to [0,1].
Image synthetic_ellipses(std::size_t size, std::uint64_t seed);

/// Every .imgf / .pgm file in `dir`, in lexicographic filename order.
std::vector<Image> load_dataset(const std::filesystem::path& dir);

struct EpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  mssn::MssnWeights weights;
  std::vector<EpochStats> curve;
  double initial_loss = 0.0;          // first batch, before any update
  std::size_t initial_loss_count = 0; // scalars averaged in initial_loss
  std::uint64_t iterations = 0;
};

struct TrainOptions {
  /// When set, epoch_NNNN.mssn, final.mssn and loss.csv are written here.
  std::optional<std::filesystem::path> checkpoint_dir;
  std::function<void(const EpochStats&)> on_epoch;
};

/// Minimizes the MSE between the network's noise estimate and the injected noise.
TrainResult train(const TrainConfig& cfg, const mssn::MssnConfig& net, const std::vector<Image>& images,
                  const TrainOptions& options = {});

/// Same loop over a prepared list of clean patches.
TrainResult train_on_patches(const TrainConfig& cfg, const mssn::MssnConfig& net, const std::vector<Image>& patches,
                             const TrainOptions& options = {});

void write_loss_csv(const std::vector<EpochStats>& curve, std::ostream& out);

struct EvalReport {
  std::vector<double> input_psnr;
  std::vector<double> output_psnr;
  double mean_input_psnr = 0.0;
  double mean_output_psnr = 0.0;
};

/// Adds noise at `sigma`, denoises with mssn_denoise, and reports PSNR (peak 1).
EvalReport eval_denoiser(mssn::MssnWeights& weights, const mssn::MssnConfig& net, double sigma,
                         const std::vector<Image>& images, std::uint64_t seed);

}  // namespace pnp::train
