#pragma once

#include <atomic>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vapf/attribute.hpp"
#include "vapf/layers.hpp"

namespace vapf {

struct AttributeEncoderConfig {
  std::size_t width = 32;
  std::size_t depth = 2;
  std::size_t heads = 4;
  std::size_t ffn_hidden = 128;
  /// Tabular prompts per layer; 0 disables tabular prompting.
  std::size_t prompts = 0;
};

/// Maps a record to one token per attribute. Categorical values select a
/// row of a per-attribute embedding table (one-hot times table); numerical
/// values scale a learned direction and add a learned bias token. A learned
/// identity vector per attribute is added on top.
class AttributeEmbedder {
 public:
  AttributeEmbedder() = default;
  AttributeEmbedder(ParameterStore& store, const std::string& prefix, AttributeSchema schema,
                    std::size_t width, Initializer& init);

  /// M x C tokens. Throws InputError for an unknown categorical level.
  Tensor operator()(const AttributeRecord& record) const;

  const AttributeSchema& schema() const { return schema_; }
  /// Numerical values clamped into their schema range so far.
  std::size_t clamped() const { return clamped_->load(); }

 private:
  struct Slot {
    Tensor table;      // categorical: cardinality x C
    Tensor direction;  // numerical: 1 x C
    Tensor bias;       // numerical: 1 x C
  };
  AttributeSchema schema_;
  std::vector<Slot> slots_;
  Tensor identity_;
  std::shared_ptr<std::atomic<std::size_t>> clamped_ =
      std::make_shared<std::atomic<std::size_t>>(0);
};

/// One deep-prompted layer: self-attention runs over [prompts; x] and the
/// prompt-position outputs are discarded, so the result has x's shape.
/// An absent prompt tensor gives the plain layer.
Tensor tab_prompt_layer_forward(const TransformerLayer& layer, const std::optional<Tensor>& prompts,
                                const Tensor& x);

class AttributeEncoder {
 public:
  AttributeEncoder() = default;
  AttributeEncoder(ParameterStore& store, const std::string& prefix, AttributeSchema schema,
                   const AttributeEncoderConfig& cfg, Initializer& init);

  /// Embedding followed by `depth` prompt-layer passes; M x C.
  Tensor operator()(const AttributeRecord& record) const;

  const AttributeEncoderConfig& config() const { return cfg_; }
  const AttributeEmbedder& embedder() const { return embed_; }
  const std::vector<TransformerLayer>& layers() const { return layers_; }
  const std::vector<Tensor>& prompts() const { return prompts_; }

 private:
  AttributeEncoderConfig cfg_;
  AttributeEmbedder embed_;
  std::vector<TransformerLayer> layers_;
  std::vector<Tensor> prompts_;
};

/// Runs the stack with an explicit prompt list; it must be empty or hold
/// one p x C block per layer (ConfigError otherwise).
Tensor attribute_encoder_forward(const AttributeEmbedder& embed,
                                 const std::vector<TransformerLayer>& layers,
                                 const std::vector<Tensor>& prompts, const AttributeRecord& record);

}  // namespace vapf
