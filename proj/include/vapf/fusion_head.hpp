#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vapf/layers.hpp"

namespace vapf {

struct FusionConfig {
  std::size_t width = 64;
  std::size_t depth = 1;
  std::size_t heads = 4;
  std::size_t ffn_hidden = 256;
  std::size_t head_hidden = 32;
};

/// Class token + modality projections + fusion transformer + FC head.
class FusionHead {
 public:
  FusionHead() = default;
  FusionHead(ParameterStore& store, const std::string& prefix, std::size_t visual_width,
             std::size_t tabular_width, const FusionConfig& cfg, Initializer& init);

  /// [CLS; proj(visual); proj(tabular)] through the fusion layers; the CLS
  /// output feeds the head. Returns a 1 x 1 logit.
  Tensor operator()(const Tensor& visual, const Tensor& tabular) const;

  /// Length of the fused sequence for the given token counts.
  static std::size_t sequence_length(std::size_t visual_tokens, std::size_t tabular_tokens) {
    return 1 + visual_tokens + tabular_tokens;
  }

  const FusionConfig& config() const { return cfg_; }

 private:
  FusionConfig cfg_;
  Tensor cls_;
  Linear proj_visual_, proj_tabular_;
  std::vector<TransformerLayer> layers_;
  LayerNorm norm_;
  Linear fc1_, fc2_;
};

}  // namespace vapf
