#include "pnp/training.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <random>

#include "pnp/adam.hpp"
#include "pnp/errors.hpp"
#include "pnp/persistence.hpp"

namespace pnp::train {

void TrainConfig::validate() const {
  if (patch < 1 || stride < 1) throw DomainError("train: patch and stride must be positive");
  if (stride > patch) throw DomainError("train: stride must not exceed the patch size");
  if (!(sigma >= 0.0)) throw DomainError("train: sigma must be nonnegative");
  if (epochs < 1 || batch < 1) throw DomainError("train: epochs and batch must be positive");
  if (!(lr0 > 0.0)) throw DomainError("train: lr0 must be positive");
  if (halving_period < 1) throw DomainError("train: halving_period must be positive");
}

std::vector<Image> extract_patches(const Image& image, std::size_t patch, std::size_t stride) {
  const auto rows = mssn::patch_offsets(image.rows, patch, stride);
  const auto cols = mssn::patch_offsets(image.cols, patch, stride);
  std::vector<Image> out;
  out.reserve(rows.size() * cols.size());
  for (auto r0 : rows)
    for (auto c0 : cols) {
      Image p(patch, patch);
      for (std::size_t r = 0; r < patch; ++r)
        for (std::size_t c = 0; c < patch; ++c) p.at(r, c) = image.at(r0 + r, c0 + c);
      out.push_back(std::move(p));
    }
  return out;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer applied to a running combination.
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ a) ^ b);
}

NoisySample add_noise(const Image& clean, double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw DomainError("add_noise: sigma must be nonnegative");
  NoisySample s{clean, Image(clean.rows, clean.cols)};
  if (sigma == 0.0) return s;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    s.noise.pixels[i] = normal(rng);
    s.noisy.pixels[i] = clean.pixels[i] + s.noise.pixels[i];
  }
  return s;
}

double lr_at(std::uint64_t iteration, const TrainConfig& cfg) {
  return cfg.lr0 * std::ldexp(1.0, -static_cast<int>(std::min<std::uint64_t>(iteration / cfg.halving_period, 2000)));
}

Image synthetic_ellipses(std::size_t size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };

  const double base = uniform(0.0, 0.3);
  const double ramp_x = uniform(-0.1, 0.1), ramp_y = uniform(-0.1, 0.1);
  struct Shape {
    double cx, cy, a, b, cosp, sinp, level, slope;
  };
  std::vector<Shape> shapes(4 + static_cast<std::size_t>(u01(rng) * 7.0));
  for (auto& s : shapes) {
    const double phi = uniform(0.0, std::numbers::pi);
    s = {uniform(-0.7, 0.7), uniform(-0.7, 0.7), uniform(0.05, 0.6), uniform(0.05, 0.6),
         std::cos(phi), std::sin(phi), uniform(-0.5, 0.8), uniform(-0.2, 0.2)};
  }
  Image img(size, size);
  const double n = static_cast<double>(size);
  for (std::size_t r = 0; r < size; ++r) {
    const double y = (n - 2.0 * static_cast<double>(r) - 1.0) / n;
    for (std::size_t c = 0; c < size; ++c) {
      const double x = (2.0 * static_cast<double>(c) + 1.0 - n) / n;
      double v = base + ramp_x * x + ramp_y * y;
      for (const auto& s : shapes) {
        const double dx = x - s.cx, dy = y - s.cy;
        const double u = dx * s.cosp + dy * s.sinp, t = -dx * s.sinp + dy * s.cosp;
        const double rho = u * u / (s.a * s.a) + t * t / (s.b * s.b);
        if (rho <= 1.0) v += s.level + s.slope * (1.0 - rho);
      }
      img.at(r, c) = std::clamp(v, 0.0, 1.0);
    }
  }
  return img;
}

std::vector<Image> load_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("training data directory '" + dir.string() + "' not found");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension();
    if (ext == ".imgf" || ext == ".pgm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Image> images;
  for (const auto& f : files) images.push_back(io::read_image(f));
  if (images.empty()) throw ContractError("training data directory '" + dir.string() + "' holds no .imgf/.pgm images");
  return images;
}

TrainResult train(const TrainConfig& cfg, const mssn::MssnConfig& net, const std::vector<Image>& images,
                  const TrainOptions& options) {
  cfg.validate();
  std::vector<Image> patches;
  for (const auto& img : images) {
    auto ps = extract_patches(img, cfg.patch, cfg.stride);
    patches.insert(patches.end(), std::make_move_iterator(ps.begin()), std::make_move_iterator(ps.end()));
  }
  return train_on_patches(cfg, net, patches, options);
}

TrainResult train_on_patches(const TrainConfig& cfg, const mssn::MssnConfig& raw_net,
                             const std::vector<Image>& patches, const TrainOptions& options) {
  cfg.validate();
  const mssn::MssnConfig net = raw_net.resolved();
  net.validate();
  if (net.patch != cfg.patch) throw ContractError("train: network patch size differs from the training patch size");
  if (patches.empty()) throw ContractError("train: empty dataset");
  for (const auto& p : patches)
    if (p.rows != cfg.patch || p.cols != cfg.patch) throw ShapeError("train: patch with wrong dims");

  if (options.checkpoint_dir) std::filesystem::create_directories(*options.checkpoint_dir);

  TrainResult result;
  result.weights = mssn::init_weights(net, mix_seed(cfg.seed, 0x1417, 0));
  nn::Adam optimizer(result.weights.trainable(net));
  const std::size_t p = cfg.patch, pp = p * p;
  std::vector<std::size_t> order(patches.size());

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 0x5f1e, epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng() % i]);

    double loss_sum = 0.0;
    std::size_t seen = 0;
    double lr = cfg.lr0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t b = std::min(cfg.batch, order.size() - start);
      nn::Tensor noisy({b, 1, p, p}), target({b, 1, p, p});
      for (std::size_t i = 0; i < b; ++i) {
        const std::size_t idx = order[start + i];
        const NoisySample s = add_noise(patches[idx], cfg.sigma, mix_seed(cfg.seed, epoch, idx));
        std::copy(s.noisy.pixels.begin(), s.noisy.pixels.end(), noisy.data().begin() + i * pp);
        std::copy(s.noise.pixels.begin(), s.noise.pixels.end(), target.data().begin() + i * pp);
      }
      lr = lr_at(result.iterations, cfg);
      const nn::Tensor estimate = mssn::mssn_forward(noisy, result.weights, net, nn::Mode::Train);
      const nn::Tensor loss = nn::mse_loss(estimate, target);
      const double value = loss.item();
      if (!std::isfinite(value))
        throw DivergenceError("train: non-finite loss at epoch " + std::to_string(epoch) + ", iteration " +
                              std::to_string(result.iterations));
      if (result.iterations == 0) {
        result.initial_loss = value;
        result.initial_loss_count = b * pp;
      }
      optimizer.zero_grad();
      nn::backward(loss);
      optimizer.step(lr);
      ++result.iterations;
      loss_sum += value * static_cast<double>(b);
      seen += b;
    }
    EpochStats stats{epoch, loss_sum / static_cast<double>(seen), lr};
    result.curve.push_back(stats);
    spdlog::info("epoch {}/{}: mean loss {:.6e}, lr {:.3e}", epoch, cfg.epochs, stats.mean_loss, stats.lr);
    if (options.checkpoint_dir) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%04zu.mssn", epoch);
      io::save_weights(result.weights, net, *options.checkpoint_dir / name);
      std::ofstream csv(*options.checkpoint_dir / "loss.csv");
      write_loss_csv(result.curve, csv);
    }
    if (options.on_epoch) options.on_epoch(stats);
  }
  if (options.checkpoint_dir) io::save_weights(result.weights, net, *options.checkpoint_dir / "final.mssn");
  return result;
}

void write_loss_csv(const std::vector<EpochStats>& curve, std::ostream& out) {
  out << "epoch,mean_loss,lr\n" << std::setprecision(17);
  for (const auto& e : curve) out << e.epoch << ',' << e.mean_loss << ',' << e.lr << '\n';
}

EvalReport eval_denoiser(mssn::MssnWeights& weights, const mssn::MssnConfig& net, double sigma,
                         const std::vector<Image>& images, std::uint64_t seed) {
  EvalReport report;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const NoisySample s = add_noise(images[i], sigma, mix_seed(seed, 0xe7a1, i));
    const Image out = mssn::mssn_denoise(s.noisy, weights, net);
    report.input_psnr.push_back(psnr_db(s.noisy, images[i]));
    report.output_psnr.push_back(psnr_db(out, images[i]));
  }
  const double n = static_cast<double>(std::max<std::size_t>(images.size(), 1));
  for (std::size_t i = 0; i < images.size(); ++i) {
    report.mean_input_psnr += report.input_psnr[i] / n;
    report.mean_output_psnr += report.output_psnr[i] / n;
  }
  return report;
}

}  // namespace pnp::train
