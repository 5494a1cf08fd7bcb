#include "vapf/fusion_head.hpp"

namespace vapf {

FusionHead::FusionHead(ParameterStore& store, const std::string& prefix, std::size_t visual_width,
                       std::size_t tabular_width, const FusionConfig& cfg, Initializer& init)
    : cfg_(cfg),
      cls_(store.add(prefix + ".cls", init.weight({1, cfg.width}))),
      proj_visual_(store, prefix + ".proj_visual", visual_width, cfg.width, init),
      proj_tabular_(store, prefix + ".proj_tabular", tabular_width, cfg.width, init) {
  for (std::size_t i = 0; i < cfg.depth; ++i) {
    layers_.emplace_back(store, prefix + ".layer" + std::to_string(i), cfg.width, cfg.heads,
                         cfg.ffn_hidden, init);
  }
  norm_ = LayerNorm(store, prefix + ".norm", cfg.width, init);
  fc1_ = Linear(store, "head.fc1", cfg.width, cfg.head_hidden, init, ParamRole::Head);
  fc2_ = Linear(store, "head.fc2", cfg.head_hidden, 1, init, ParamRole::Head);
}

Tensor FusionHead::operator()(const Tensor& visual, const Tensor& tabular) const {
  Tensor seq = ops::concat({cls_, proj_visual_(visual), proj_tabular_(tabular)}, 0);
  for (const auto& layer : layers_) seq = layer(seq);
  Tensor cls = ops::split(seq, 0, {1, seq.dim(0) - 1})[0];
  return fc2_(ops::gelu(fc1_(norm_(cls))));
}

}  // namespace vapf
