#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "vapf/attribute_encoder.hpp"
#include "vapf/fusion_head.hpp"
#include "vapf/visual_encoder.hpp"
#include "vapf/volume_io.hpp"

namespace vapf {

/// Fine-tuning variant. FT trains everything on the prompt-free model; the
/// others freeze the backbone and differ in which prompt families exist:
///   Vap     visual + tabular prompts + global prompt (full prompt tuning)
///   Vis     visual prompts only
///   Tab     tabular prompts only
///   VisTab  visual + tabular prompts, no global prompt
enum class Strategy { FT, Vap, Vis, Tab, VisTab };

const char* to_string(Strategy s);
/// Accepts the CLI spellings ft, pt, vis, tab, vistab.
Strategy parse_strategy(const std::string& s);
bool uses_prompts(Strategy s);

struct PromptCounts {
  std::size_t visual = 10;
  std::size_t tabular = 5;
};

struct ModelConfig {
  VisualEncoderConfig visual;
  AttributeEncoderConfig tabular;
  FusionConfig fusion;
  AttributeSchema schema = AttributeSchema::reference();

  void validate() const;
  nlohmann::json to_json() const;
  /// Unknown keys raise ConfigError naming the key.
  static ModelConfig from_json(const nlohmann::json& j);
};

/// Copy of `base` with prompt settings for `strategy` (prompt counts from
/// `counts`, global prompt only for Vap).
ModelConfig configure_for(Strategy strategy, ModelConfig base, const PromptCounts& counts);

/// The visual-attribute fusion transformer, with or without prompts
/// depending on its configuration.
class VapFormer {
 public:
  VapFormer(const ModelConfig& cfg, std::uint64_t seed);
  VapFormer(const VapFormer&) = delete;
  VapFormer& operator=(const VapFormer&) = delete;

  /// 1 x 1 logit for one subject.
  Tensor forward(const Tensor& volume, const AttributeRecord& record) const;
  Tensor forward(const Volume& volume, const AttributeRecord& record) const {
    return forward(volume.to_tensor(), record);
  }

  const ModelConfig& config() const { return cfg_; }
  ParameterStore& params() { return store_; }
  const ParameterStore& params() const { return store_; }
  VisualEncoder& visual() { return visual_; }
  const VisualEncoder& visual() const { return visual_; }
  const AttributeEncoder& tabular() const { return tabular_; }
  const FusionHead& fusion() const { return fusion_; }

 private:
  ModelConfig cfg_;
  ParameterStore store_;
  VisualEncoder visual_;
  AttributeEncoder tabular_;
  FusionHead fusion_;
};

}  // namespace vapf
