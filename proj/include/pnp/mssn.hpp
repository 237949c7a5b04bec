#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pnp/denoiser.hpp"
#include "pnp/imaging.hpp"
#include "pnp/ops.hpp"
#include "pnp/tensor.hpp"

namespace pnp::mssn {

enum class Variant : std::uint8_t {
  Mssn = 0,  // mixed pixel-wise + channel-wise multi-head attention
  Ssn = 1,   // single pixel-wise head
};

/// Network hyper-parameters. Zero d_k/d_v entries mean "n / heads" for the
/// corresponding attention type (n = features for pixel-wise, patch^2 for
/// channel-wise), floored at 1.
struct MssnConfig {
  std::size_t features = 16;
  std::size_t blocks = 1;
  std::size_t heads = 2;
  std::size_t patch = 16;
  std::size_t dk_pixel = 0;
  std::size_t dv_pixel = 0;
  std::size_t dk_channel = 0;
  std::size_t dv_channel = 0;
  bool tie_blocks = true;
  Variant variant = Variant::Mssn;

  /// Copy with every derived field filled in; SSN forces a single head.
  MssnConfig resolved() const;
  void validate() const;
  bool operator==(const MssnConfig&) const = default;

  /// 128 features, 8 blocks, 2 heads, 42x42 patches.
  static MssnConfig full_scale();
};

struct TensorSpec {
  std::string name;
  nn::Shape dims;
  bool trainable;
};

/// Every tensor the network owns, in canonical order. A pure function of the config.
std::vector<TensorSpec> weight_census(const MssnConfig& cfg);
/// Number of trainable scalars.
std::size_t parameter_count(const MssnConfig& cfg);

/// Named parameter set plus batch-norm running statistics.
class MssnWeights {
 public:
  MssnWeights() = default;
  explicit MssnWeights(const MssnConfig& cfg);  // census shapes, zero-filled, BN var = 1

  nn::Tensor& at(const std::string& name);
  const nn::Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  void set(const std::string& name, nn::Tensor t);

  std::vector<nn::Tensor> trainable(const MssnConfig& cfg) const;
  const std::map<std::string, nn::Tensor>& all() const { return tensors_; }
  std::size_t tensor_count() const { return tensors_.size(); }

  MssnWeights clone() const;

 private:
  std::map<std::string, nn::Tensor> tensors_;
};

/// He-normal convs, Xavier-uniform attention projections, zero final conv.
MssnWeights init_weights(const MssnConfig& cfg, std::uint64_t seed);

/// softmax(Q K^T) V without score scaling.
nn::Tensor attention(const nn::Tensor& query, const nn::Tensor& key, const nn::Tensor& value);

struct HeadWeights {
  nn::Tensor wq, wk, wv;
};

/// Self-attention over the rows of z: [head_1 ... head_h] W_out.
nn::Tensor multi_head_attention(const nn::Tensor& z, std::span<const HeadWeights> heads, const nn::Tensor& w_out);

/// Per-sample pixel-wise and channel-wise branches, concatenated along channels
/// and reduced by a 1x1 conv. features: [N,F,P,P].
nn::Tensor mixed_attention_layer(const nn::Tensor& features, const MssnWeights& w, const MssnConfig& cfg,
                                 std::size_t block);

/// input + conv2(ReLU(BN(conv1(ReLU(BN(attention(input))))))).
nn::Tensor recurrent_block(const nn::Tensor& features, MssnWeights& w, const MssnConfig& cfg, std::size_t block,
                           nn::Mode mode);

/// Noise estimate for a batch of patches [N,1,P,P]; denoised = patch - estimate.
nn::Tensor mssn_forward(const nn::Tensor& patches, MssnWeights& w, const MssnConfig& cfg, nn::Mode mode);

/// Top-left offsets {0, s, 2s, ...} that fit, plus the flush offset extent - patch.
std::vector<std::size_t> patch_offsets(std::size_t extent, std::size_t patch, std::size_t stride);

/// Patch-wise inference with stride patch/2 and uniform averaging of overlaps.
Image mssn_denoise(const Image& image, MssnWeights& w, const MssnConfig& cfg);

class MssnDenoiser final : public Denoiser {
 public:
  MssnDenoiser(MssnWeights weights, MssnConfig cfg);
  std::string name() const override;
  // sigma is ignored: the network was trained for one noise level.
  Image apply(const Image& z, double sigma) const override;

 private:
  mutable MssnWeights weights_;
  MssnConfig cfg_;
};

}  // namespace pnp::mssn
