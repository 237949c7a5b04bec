#include "pnp/mssn.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <random>

#include "pnp/errors.hpp"

namespace pnp::mssn {

using nn::Mode;
using nn::Shape;
using nn::Tensor;

MssnConfig MssnConfig::resolved() const {
  MssnConfig r = *this;
  if (r.variant == Variant::Ssn) r.heads = 1;
  const std::size_t h = std::max<std::size_t>(r.heads, 1);
  const std::size_t pix_n = r.features, chn_n = r.patch * r.patch;
  if (r.dk_pixel == 0) r.dk_pixel = std::max<std::size_t>(pix_n / h, 1);
  if (r.dv_pixel == 0) r.dv_pixel = std::max<std::size_t>(pix_n / h, 1);
  if (r.dk_channel == 0) r.dk_channel = std::max<std::size_t>(chn_n / h, 1);
  if (r.dv_channel == 0) r.dv_channel = std::max<std::size_t>(chn_n / h, 1);
  return r;
}

void MssnConfig::validate() const {
  if (features < 1 || blocks < 1 || heads < 1 || patch < 1)
    throw DomainError("mssn config: features, blocks, heads and patch must be positive");
  const MssnConfig r = resolved();
  if (r.heads * r.dk_pixel > r.features)
    throw DomainError("mssn config: pixel-wise heads * d_k exceeds the feature count");
  if (r.variant == Variant::Mssn && r.heads * r.dk_channel > r.patch * r.patch)
    throw DomainError("mssn config: channel-wise heads * d_k exceeds patch^2");
}

MssnConfig MssnConfig::full_scale() {
  MssnConfig c;
  c.features = 128;
  c.blocks = 8;
  c.heads = 2;
  c.patch = 42;
  return c;
}

namespace {

std::string block_prefix(const MssnConfig& cfg, std::size_t block) {
  return "block" + std::to_string(cfg.tie_blocks ? 0 : block) + ".";
}

void add_bn(std::vector<TensorSpec>& out, const std::string& prefix, std::size_t f) {
  out.push_back({prefix + "gamma", {f}, true});
  out.push_back({prefix + "beta", {f}, true});
  out.push_back({prefix + "running_mean", {f}, false});
  out.push_back({prefix + "running_var", {f}, false});
}

void add_conv(std::vector<TensorSpec>& out, const std::string& prefix, std::size_t cout, std::size_t cin,
              std::size_t k) {
  out.push_back({prefix + "weight", {cout, cin, k, k}, true});
  out.push_back({prefix + "bias", {cout}, true});
}

void add_attention(std::vector<TensorSpec>& out, const std::string& prefix, std::size_t heads, std::size_t n,
                   std::size_t dk, std::size_t dv) {
  for (std::size_t h = 0; h < heads; ++h) {
    const std::string hs = std::to_string(h);
    out.push_back({prefix + "wq." + hs, {n, dk}, true});
    out.push_back({prefix + "wk." + hs, {n, dk}, true});
    out.push_back({prefix + "wv." + hs, {n, dv}, true});
  }
  out.push_back({prefix + "wout", {heads * dv, n}, true});
}

}  // namespace

std::vector<TensorSpec> weight_census(const MssnConfig& raw) {
  raw.validate();
  const MssnConfig cfg = raw.resolved();
  const std::size_t f = cfg.features;
  std::vector<TensorSpec> out;
  add_conv(out, "head.conv.", f, 1, 3);
  const std::size_t distinct = cfg.tie_blocks ? 1 : cfg.blocks;
  for (std::size_t b = 0; b < distinct; ++b) {
    const std::string p = block_prefix(cfg, b);
    add_attention(out, p + "pix.", cfg.heads, f, cfg.dk_pixel, cfg.dv_pixel);
    if (cfg.variant == Variant::Mssn)
      add_attention(out, p + "chn.", cfg.heads, cfg.patch * cfg.patch, cfg.dk_channel, cfg.dv_channel);
    add_conv(out, p + "mix.", f, cfg.variant == Variant::Mssn ? 2 * f : f, 1);
    add_bn(out, p + "bn1.", f);
    add_conv(out, p + "conv1.", f, f, 3);
    add_bn(out, p + "bn2.", f);
    add_conv(out, p + "conv2.", f, f, 3);
  }
  add_bn(out, "tail.bn1.", f);
  add_conv(out, "tail.conv1.", f, f, 3);
  add_bn(out, "tail.bn2.", f);
  add_conv(out, "tail.conv2.", f, f, 3);
  add_conv(out, "out.conv.", 1, f, 3);
  return out;
}

std::size_t parameter_count(const MssnConfig& cfg) {
  std::size_t n = 0;
  for (const auto& spec : weight_census(cfg))
    if (spec.trainable) n += nn::shape_size(spec.dims);
  return n;
}

MssnWeights::MssnWeights(const MssnConfig& cfg) {
  for (const auto& spec : weight_census(cfg)) {
    const bool is_var = spec.name.ends_with("running_var");
    tensors_.emplace(spec.name, Tensor(spec.dims, is_var ? 1.0 : 0.0, spec.trainable));
  }
}

Tensor& MssnWeights::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ContractError("mssn weights: missing tensor '" + name + "'");
  return it->second;
}

const Tensor& MssnWeights::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ContractError("mssn weights: missing tensor '" + name + "'");
  return it->second;
}

void MssnWeights::set(const std::string& name, Tensor t) { tensors_.insert_or_assign(name, std::move(t)); }

std::vector<Tensor> MssnWeights::trainable(const MssnConfig& cfg) const {
  std::vector<Tensor> out;
  for (const auto& spec : weight_census(cfg))
    if (spec.trainable) out.push_back(at(spec.name));
  return out;
}

MssnWeights MssnWeights::clone() const {
  MssnWeights copy;
  for (const auto& [name, t] : tensors_) copy.tensors_.emplace(name, t.clone());
  return copy;
}

MssnWeights init_weights(const MssnConfig& cfg, std::uint64_t seed) {
  MssnWeights w(cfg);
  std::mt19937_64 rng(seed);
  for (const auto& spec : weight_census(cfg)) {
    if (!spec.trainable) continue;
    Tensor& t = w.at(spec.name);
    auto data = t.data();
    const bool is_conv_weight = spec.name.ends_with(".weight");
    const bool is_gamma = spec.name.ends_with("gamma");
    if (spec.name.starts_with("out.conv.")) continue;  // zero: start from the identity denoiser
    if (is_gamma) {
      std::fill(data.begin(), data.end(), 1.0);
    } else if (is_conv_weight) {
      const double fan_in = static_cast<double>(spec.dims[1] * spec.dims[2] * spec.dims[3]);
      std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
      for (auto& v : data) v = normal(rng);
    } else if (spec.dims.size() == 2) {
      const double limit = std::sqrt(6.0 / static_cast<double>(spec.dims[0] + spec.dims[1]));
      std::uniform_real_distribution<double> uniform(-limit, limit);
      for (auto& v : data) v = uniform(rng);
    }
    // Biases and BN shifts stay zero.
  }
  return w;
}

Tensor attention(const Tensor& query, const Tensor& key, const Tensor& value) {
  if (query.rank() != 2 || key.rank() != 2 || value.rank() != 2) throw ShapeError("attention expects rank-2 inputs");
  if (query.dim(0) != key.dim(0) || key.dim(0) != value.dim(0) || query.dim(1) != key.dim(1))
    throw ShapeError("attention: Q " + nn::shape_string(query.dims()) + ", K " + nn::shape_string(key.dims()) +
                     ", V " + nn::shape_string(value.dims()));
  const Tensor scores = nn::matmul(query, nn::transpose(key));
  if (!scores.all_finite()) throw DivergenceError("attention: non-finite scores");
  return nn::matmul(nn::softmax_rows(scores), value);
}

Tensor multi_head_attention(const Tensor& z, std::span<const HeadWeights> heads, const Tensor& w_out) {
  if (heads.empty()) throw ShapeError("multi_head_attention needs at least one head");
  std::vector<Tensor> outputs;
  outputs.reserve(heads.size());
  for (const auto& h : heads)
    outputs.push_back(attention(nn::matmul(z, h.wq), nn::matmul(z, h.wk), nn::matmul(z, h.wv)));
  Tensor joined = outputs.size() == 1 ? outputs.front() : nn::concat(outputs, 1);
  return nn::matmul(joined, w_out);
}

namespace {

std::vector<HeadWeights> gather_heads(const MssnWeights& w, const std::string& prefix, std::size_t heads) {
  std::vector<HeadWeights> out;
  for (std::size_t h = 0; h < heads; ++h) {
    const std::string hs = std::to_string(h);
    out.push_back({w.at(prefix + "wq." + hs), w.at(prefix + "wk." + hs), w.at(prefix + "wv." + hs)});
  }
  return out;
}

Tensor as_batch(const Tensor& x) {
  if (x.rank() == 4) return x;
  if (x.rank() == 3) return nn::reshape(x, {1, x.dim(0), x.dim(1), x.dim(2)});
  throw ShapeError("expected [C,H,W] or [N,C,H,W], got " + nn::shape_string(x.dims()));
}

void warn_if_untrained(const Tensor& mean, const Tensor& var) {
  static std::atomic<bool> warned{false};
  for (std::size_t i = 0; i < mean.size(); ++i)
    if (mean[i] != 0.0 || var[i] != 1.0) return;
  if (!warned.exchange(true))
    spdlog::warn("batchnorm inference with initial running statistics (mean 0, var 1): network was never trained");
}

Tensor bn(const Tensor& x, MssnWeights& w, const std::string& prefix, Mode mode) {
  nn::BatchNormStats stats{w.at(prefix + "running_mean"), w.at(prefix + "running_var")};
  if (mode == Mode::Infer) warn_if_untrained(stats.running_mean, stats.running_var);
  return nn::batchnorm(x, w.at(prefix + "gamma"), w.at(prefix + "beta"), stats, mode);
}

Tensor conv(const Tensor& x, const MssnWeights& w, const std::string& prefix) {
  return nn::conv2d(x, w.at(prefix + "weight"), w.at(prefix + "bias"));
}

Tensor bn_relu_conv(const Tensor& x, MssnWeights& w, const std::string& bn_prefix, const std::string& conv_prefix,
                    Mode mode) {
  return conv(nn::relu(bn(x, w, bn_prefix, mode)), w, conv_prefix);
}

}  // namespace

Tensor mixed_attention_layer(const Tensor& features, const MssnWeights& w, const MssnConfig& raw,
                             std::size_t block) {
  const MssnConfig cfg = raw.resolved();
  const Tensor x = as_batch(features);
  const std::size_t n = x.dim(0), f = x.dim(1), ph = x.dim(2), pw = x.dim(3);
  if (f != cfg.features) throw ShapeError("mixed attention: feature count does not match config");
  if (cfg.variant == Variant::Mssn && ph * pw != cfg.patch * cfg.patch)
    throw ShapeError("mixed attention: spatial size does not match the configured patch");
  const std::string p = block_prefix(cfg, block);
  const auto pix_heads = gather_heads(w, p + "pix.", cfg.heads);
  const Tensor& pix_out = w.at(p + "pix.wout");
  std::vector<HeadWeights> chn_heads;
  if (cfg.variant == Variant::Mssn) chn_heads = gather_heads(w, p + "chn.", cfg.heads);

  std::vector<Tensor> per_sample;
  per_sample.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    // Channel tokens: rows are channels, columns are spatial positions.
    const Tensor tokens_c = nn::reshape(nn::select(x, s), {f, ph * pw});
    // Pixel tokens: rows are positions, columns are channels.
    const Tensor tokens_p = nn::transpose(tokens_c);
    Tensor pix = nn::reshape(nn::transpose(multi_head_attention(tokens_p, pix_heads, pix_out)), {f, ph, pw});
    if (cfg.variant == Variant::Ssn) {
      per_sample.push_back(pix);
      continue;
    }
    Tensor chn = nn::reshape(multi_head_attention(tokens_c, chn_heads, w.at(p + "chn.wout")), {f, ph, pw});
    const std::array<Tensor, 2> both{pix, chn};
    per_sample.push_back(nn::concat(both, 0));
  }
  Tensor joined = n == 1 ? nn::reshape(per_sample.front(), {1, per_sample.front().dim(0), ph, pw})
                         : nn::stack(per_sample);
  Tensor out = conv(joined, w, p + "mix.");
  return features.rank() == 3 ? nn::reshape(out, {f, ph, pw}) : out;
}

Tensor recurrent_block(const Tensor& features, MssnWeights& w, const MssnConfig& raw, std::size_t block, Mode mode) {
  const MssnConfig cfg = raw.resolved();
  const std::string p = block_prefix(cfg, block);
  const Tensor attended = mixed_attention_layer(features, w, cfg, block);
  Tensor t = bn_relu_conv(attended, w, p + "bn1.", p + "conv1.", mode);
  t = bn_relu_conv(t, w, p + "bn2.", p + "conv2.", mode);
  return nn::add(features, t);
}

Tensor mssn_forward(const Tensor& patches, MssnWeights& w, const MssnConfig& raw, Mode mode) {
  const MssnConfig cfg = raw.resolved();
  const Tensor x = as_batch(patches);
  if (x.dim(1) != 1 || x.dim(2) != cfg.patch || x.dim(3) != cfg.patch)
    throw ShapeError("mssn_forward: expected patches [N,1," + std::to_string(cfg.patch) + "," +
                     std::to_string(cfg.patch) + "], got " + nn::shape_string(patches.dims()));
  Tensor h = nn::relu(conv(x, w, "head.conv."));
  for (std::size_t b = 0; b < cfg.blocks; ++b) h = recurrent_block(h, w, cfg, b, mode);
  h = bn_relu_conv(h, w, "tail.bn1.", "tail.conv1.", mode);
  h = bn_relu_conv(h, w, "tail.bn2.", "tail.conv2.", mode);
  Tensor estimate = conv(h, w, "out.conv.");
  if (!estimate.all_finite()) throw DivergenceError("mssn_forward: non-finite activations");
  return patches.rank() == 3 ? nn::reshape(estimate, {1, cfg.patch, cfg.patch}) : estimate;
}

std::vector<std::size_t> patch_offsets(std::size_t extent, std::size_t patch, std::size_t stride) {
  if (patch < 1 || stride < 1) throw DomainError("patch_offsets: patch and stride must be positive");
  if (extent < patch)
    throw ContractError("image extent " + std::to_string(extent) + " is smaller than patch " + std::to_string(patch));
  std::vector<std::size_t> out;
  for (std::size_t o = 0; o + patch <= extent; o += stride) out.push_back(o);
  if (out.back() != extent - patch) out.push_back(extent - patch);
  return out;
}

Image mssn_denoise(const Image& image, MssnWeights& w, const MssnConfig& raw) {
  const MssnConfig cfg = raw.resolved();
  const std::size_t p = cfg.patch;
  if (image.rows < p || image.cols < p)
    throw ContractError("mssn_denoise: image " + std::to_string(image.rows) + "x" + std::to_string(image.cols) +
                        " is smaller than the patch size " + std::to_string(p));
  const std::size_t stride = std::max<std::size_t>(p / 2, 1);
  const auto rows = patch_offsets(image.rows, p, stride);
  const auto cols = patch_offsets(image.cols, p, stride);
  std::vector<std::pair<std::size_t, std::size_t>> corners;
  for (auto r : rows)
    for (auto c : cols) corners.emplace_back(r, c);

  nn::NoGradGuard no_grad;
  Image mean(image.rows, image.cols);
  std::vector<std::size_t> count(image.size(), 0);
  constexpr std::size_t kChunk = 32;
  for (std::size_t start = 0; start < corners.size(); start += kChunk) {
    const std::size_t m = std::min(kChunk, corners.size() - start);
    Tensor batch({m, 1, p, p});
    for (std::size_t i = 0; i < m; ++i) {
      const auto [r0, c0] = corners[start + i];
      for (std::size_t r = 0; r < p; ++r)
        for (std::size_t c = 0; c < p; ++c) batch[(i * p + r) * p + c] = image.at(r0 + r, c0 + c);
    }
    const Tensor est = mssn_forward(batch, w, cfg, Mode::Infer);
    for (std::size_t i = 0; i < m; ++i) {
      const auto [r0, c0] = corners[start + i];
      for (std::size_t r = 0; r < p; ++r)
        for (std::size_t c = 0; c < p; ++c) {
          const std::size_t k = (i * p + r) * p + c;
          const std::size_t px = (r0 + r) * image.cols + (c0 + c);
          const double denoised = batch[k] - est[k];
          // Running mean: identical contributions average to themselves exactly.
          count[px] += 1;
          mean.pixels[px] += (denoised - mean.pixels[px]) / static_cast<double>(count[px]);
        }
    }
  }
  return mean;
}

MssnDenoiser::MssnDenoiser(MssnWeights weights, MssnConfig cfg) : weights_(std::move(weights)), cfg_(cfg) {
  cfg_.validate();
  for (const auto& spec : weight_census(cfg_)) {
    const auto& t = weights_.at(spec.name);
    if (t.dims() != spec.dims) throw ShapeError("mssn weights: tensor '" + spec.name + "' has the wrong shape");
  }
}

std::string MssnDenoiser::name() const { return cfg_.variant == Variant::Ssn ? "ssn" : "mssn"; }

Image MssnDenoiser::apply(const Image& z, double) const { return mssn_denoise(z, weights_, cfg_); }

}  // namespace pnp::mssn
