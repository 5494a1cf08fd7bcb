#include "vapf/model.hpp"

#include <array>

#include "vapf/errors.hpp"
#include "vapf/json_util.hpp"

namespace vapf {

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::FT:
      return "ft";
    case Strategy::Vap:
      return "pt";
    case Strategy::Vis:
      return "vis";
    case Strategy::Tab:
      return "tab";
    case Strategy::VisTab:
      return "vistab";
  }
  return "?";
}

Strategy parse_strategy(const std::string& s) {
  if (s == "ft") return Strategy::FT;
  if (s == "pt" || s == "vap") return Strategy::Vap;
  if (s == "vis") return Strategy::Vis;
  if (s == "tab") return Strategy::Tab;
  if (s == "vistab") return Strategy::VisTab;
  throw ConfigError("unknown strategy '" + s + "' (expected ft|pt|vis|tab|vistab)");
}

bool uses_prompts(Strategy s) { return s != Strategy::FT; }

void ModelConfig::validate() const {
  visual.validate();
  schema.validate();
  if (tabular.width == 0 || tabular.heads == 0 || tabular.width % tabular.heads != 0) {
    throw ConfigError("tabular: heads must divide width");
  }
  if (fusion.width == 0 || fusion.heads == 0 || fusion.width % fusion.heads != 0) {
    throw ConfigError("fusion: heads must divide width");
  }
  if (tabular.depth == 0 && tabular.prompts > 0) {
    throw ConfigError("tabular prompts need at least one tabular layer");
  }
  if (fusion.head_hidden == 0) throw ConfigError("fusion: head_hidden must be positive");
}

nlohmann::json ModelConfig::to_json() const {
  nlohmann::json j;
  j["visual"] = {{"volume", visual.volume},
                 {"patch", visual.patch},
                 {"widths", visual.widths},
                 {"blocks_per_stage", visual.blocks_per_stage},
                 {"downsample", visual.downsample},
                 {"ffn_ratio", visual.ffn_ratio},
                 {"prompts", visual.prompts},
                 {"global_prompt", visual.global_prompt}};
  j["tabular"] = {{"width", tabular.width},
                  {"depth", tabular.depth},
                  {"heads", tabular.heads},
                  {"ffn_hidden", tabular.ffn_hidden},
                  {"prompts", tabular.prompts}};
  j["fusion"] = {{"width", fusion.width},
                 {"depth", fusion.depth},
                 {"heads", fusion.heads},
                 {"ffn_hidden", fusion.ffn_hidden},
                 {"head_hidden", fusion.head_hidden}};
  j["schema"] = schema.to_json();
  return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  StrictObject root(j, "model");
  if (auto* v = root.object("visual")) {
    StrictObject o(*v, "model.visual");
    o.read("volume", cfg.visual.volume);
    o.read("patch", cfg.visual.patch);
    o.read("widths", cfg.visual.widths);
    o.read("blocks_per_stage", cfg.visual.blocks_per_stage);
    o.read("downsample", cfg.visual.downsample);
    o.read("ffn_ratio", cfg.visual.ffn_ratio);
    o.read("prompts", cfg.visual.prompts);
    o.read("global_prompt", cfg.visual.global_prompt);
    o.finish();
  }
  if (auto* t = root.object("tabular")) {
    StrictObject o(*t, "model.tabular");
    o.read("width", cfg.tabular.width);
    o.read("depth", cfg.tabular.depth);
    o.read("heads", cfg.tabular.heads);
    o.read("ffn_hidden", cfg.tabular.ffn_hidden);
    o.read("prompts", cfg.tabular.prompts);
    o.finish();
  }
  if (auto* f = root.object("fusion")) {
    StrictObject o(*f, "model.fusion");
    o.read("width", cfg.fusion.width);
    o.read("depth", cfg.fusion.depth);
    o.read("heads", cfg.fusion.heads);
    o.read("ffn_hidden", cfg.fusion.ffn_hidden);
    o.read("head_hidden", cfg.fusion.head_hidden);
    o.finish();
  }
  if (auto* s = root.object("schema")) cfg.schema = AttributeSchema::from_json(*s);
  root.finish();
  cfg.validate();
  return cfg;
}

ModelConfig configure_for(Strategy strategy, ModelConfig cfg, const PromptCounts& counts) {
  const bool vis = strategy == Strategy::Vap || strategy == Strategy::Vis ||
                   strategy == Strategy::VisTab;
  const bool tab = strategy == Strategy::Vap || strategy == Strategy::Tab ||
                   strategy == Strategy::VisTab;
  cfg.visual.prompts = vis ? counts.visual : 0;
  cfg.visual.global_prompt = strategy == Strategy::Vap;
  cfg.tabular.prompts = tab ? counts.tabular : 0;
  if (vis && counts.visual == 0) throw ConfigError("strategy needs a positive visual prompt count");
  if (tab && counts.tabular == 0) throw ConfigError("strategy needs a positive tabular prompt count");
  return cfg;
}

VapFormer::VapFormer(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Initializer init(seed);
  visual_ = VisualEncoder(store_, "vis", cfg_.visual, init);
  tabular_ = AttributeEncoder(store_, "tab", cfg_.schema, cfg_.tabular, init);
  fusion_ = FusionHead(store_, "fusion", cfg_.visual.widths.back(), cfg_.tabular.width,
                       cfg_.fusion, init);
}

Tensor VapFormer::forward(const Tensor& volume, const AttributeRecord& record) const {
  return fusion_(visual_(volume), tabular_(record));
}

}  // namespace vapf
