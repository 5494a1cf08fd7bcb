#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "vapf/layers.hpp"

namespace vapf {

struct VisualEncoderConfig {
  std::array<std::size_t, 3> volume{32, 32, 32};
  /// Cubic patch edge for the first stage.
  std::size_t patch = 4;
  /// Channel width per stage; the stage count is widths.size().
  std::vector<std::size_t> widths{32, 64};
  std::size_t blocks_per_stage = 1;
  /// Grid reduction between consecutive stages (cubic token merge).
  std::size_t downsample = 2;
  std::size_t ffn_ratio = 4;
  /// Visual prompts P per EPA block, split evenly between the spatial and
  /// channel branches; 0 disables visual prompting.
  std::size_t prompts = 0;
  bool global_prompt = false;

  /// Throws ConfigError on indivisible extents, odd P, or a global prompt
  /// without prompts.
  void validate() const;
  std::array<std::size_t, 3> grid(std::size_t stage) const;
  std::size_t tokens(std::size_t stage) const;
};

/// Flat voxel index for each (token, patch element) pair; tokens and the
/// voxels inside a patch are both in raster (depth, height, width) order.
std::vector<std::size_t> patchify_index(const std::array<std::size_t, 3>& dims, std::size_t patch);
/// Index map that merges each factor^3 neighbourhood of a token grid into
/// one row of factor^3 * channels values.
std::vector<std::size_t> merge_index(const std::array<std::size_t, 3>& grid, std::size_t channels,
                                     std::size_t factor);

/// Stage-entry embedding: gather rows, project linearly, add a learned
/// positional embedding.
struct StageEmbedding {
  std::vector<std::size_t> index;
  Shape gathered_shape;
  Linear proj;
  Tensor pos;

  Tensor operator()(const Tensor& input) const;
};

/// Visual prompts of one EPA block.
struct VisualPromptSet {
  Tensor spatial;  // P/2 x C
  Tensor channel;  // P/2 x C
};

/// Linear map from the P x C prompt-position outputs to one C-vector g:
/// g = w · Z + b, where w mixes the P prompt rows and b is per channel.
struct GlobalPromptTransform {
  Tensor weight;  // 1 x P
  Tensor bias;    // C

  Tensor operator()(const Tensor& prompt_outputs) const;
};

/// Efficient paired attention block with one query and one key projection
/// shared by the spatial and channel branches.
struct EpaBlock {
  LayerNorm ln1, ln2;
  Linear q, k, v_spatial, v_channel, out_spatial, out_channel;
  FeedForward ffn;

  EpaBlock() = default;
  EpaBlock(ParameterStore& store, const std::string& prefix, std::size_t width,
           std::size_t ffn_hidden, Initializer& init);

  /// Attention across tokens: softmax(Q Kᵀ / sqrt(C)) V_spatial, then the
  /// spatial output projection. Input is the normalized (prompts + tokens)
  /// sequence; output has the same shape.
  Tensor swa(const Tensor& seq) const;
  /// Attention across channels: A = softmax(Qᵀ K / sqrt(T)) is C x C and
  /// the result is V_channel Aᵀ followed by the channel output projection.
  Tensor cwa(const Tensor& seq) const;
};

/// One EPA block with optional prompts and optional global prompt:
///   [P_s, I_S] = SWA(LN([prompts.spatial; I])), [P_c, I_C] = CWA(LN([prompts.channel; I]))
///   y = I + (I_S + I_C) ⊙ T([P_s; P_c])   (without gpt: y = I + (I_S + I_C))
///   out = y + FFN(LN(y))
Tensor epa_prompt_forward(const EpaBlock& block, const std::optional<VisualPromptSet>& prompts,
                          const std::optional<GlobalPromptTransform>& gpt, const Tensor& tokens);

struct VisualStage {
  StageEmbedding embed;
  std::vector<EpaBlock> blocks;
  std::vector<std::optional<VisualPromptSet>> prompts;
  std::vector<std::optional<GlobalPromptTransform>> gpts;
};

class VisualEncoder {
 public:
  VisualEncoder() = default;
  VisualEncoder(ParameterStore& store, const std::string& prefix, const VisualEncoderConfig& cfg,
                Initializer& init);

  /// D x H x W volume to N_final x C_final tokens.
  Tensor operator()(const Tensor& volume) const;

  const VisualEncoderConfig& config() const { return cfg_; }
  const std::vector<VisualStage>& stages() const { return stages_; }
  std::vector<VisualStage>& stages() { return stages_; }

 private:
  VisualEncoderConfig cfg_;
  std::vector<VisualStage> stages_;
};

/// Runs explicit stages; every prompt/gpt list must match its block count.
Tensor visual_encoder_forward(const std::vector<VisualStage>& stages, const Tensor& volume);

}  // namespace vapf
