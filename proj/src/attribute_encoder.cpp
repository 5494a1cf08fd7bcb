#include "vapf/attribute_encoder.hpp"

#include <cmath>

#include "vapf/errors.hpp"

namespace vapf {

AttributeEmbedder::AttributeEmbedder(ParameterStore& store, const std::string& prefix,
                                     AttributeSchema schema, std::size_t width, Initializer& init)
    : schema_(std::move(schema)) {
  schema_.validate();
  for (const auto& a : schema_.attributes) {
    const std::string base = prefix + ".embed." + a.name;
    Slot s;
    if (a.kind == AttributeKind::Categorical) {
      s.table = store.add(base + ".table", init.weight({a.cardinality, width}));
    } else {
      s.direction = store.add(base + ".dir", init.weight({1, width}));
      s.bias = store.add(base + ".bias", init.weight({1, width}));
    }
    slots_.push_back(std::move(s));
  }
  identity_ = store.add(prefix + ".embed.identity", init.weight({schema_.attributes.size(), width}));
}

Tensor AttributeEmbedder::operator()(const AttributeRecord& record) const {
  const auto& attrs = schema_.attributes;
  if (record.values.size() != attrs.size()) {
    throw InputError("attribute record has " + std::to_string(record.values.size()) +
                     " values, schema expects " + std::to_string(attrs.size()));
  }
  std::vector<Tensor> tokens;
  tokens.reserve(attrs.size());
  for (std::size_t i = 0; i < attrs.size(); ++i) {
    const auto& a = attrs[i];
    const double v = record.values[i];
    if (a.kind == AttributeKind::Categorical) {
      const double level = std::floor(v);
      if (level != v || level < 0.0 || level >= static_cast<double>(a.cardinality)) {
        throw InputError("attribute '" + a.name + "': unknown categorical level " +
                         std::to_string(v));
      }
      Tensor onehot({1, a.cardinality}, 0.0);
      onehot[static_cast<std::size_t>(level)] = 1.0;
      tokens.push_back(ops::matmul(onehot, slots_[i].table));
    } else {
      bool clamped = false;
      const double x = min_max_normalize(v, a, &clamped);
      if (clamped) ++*clamped_;
      tokens.push_back(ops::add(ops::scale(slots_[i].direction, x), slots_[i].bias));
    }
  }
  return ops::add(ops::concat(tokens, 0), identity_);
}

Tensor tab_prompt_layer_forward(const TransformerLayer& layer, const std::optional<Tensor>& prompts,
                                const Tensor& x) {
  if (!prompts) return layer(x);
  if (prompts->rank() != 2 || prompts->dim(1) != x.dim(1)) {
    throw ShapeError("tabular prompts " + shape_str(prompts->shape()) + " vs tokens " +
                     shape_str(x.shape()));
  }
  const std::size_t p = prompts->dim(0);
  Tensor y = layer(ops::concat({*prompts, x}, 0));
  return ops::split(y, 0, {p, x.dim(0)})[1];
}

Tensor attribute_encoder_forward(const AttributeEmbedder& embed,
                                 const std::vector<TransformerLayer>& layers,
                                 const std::vector<Tensor>& prompts, const AttributeRecord& record) {
  if (!prompts.empty() && prompts.size() != layers.size()) {
    throw ConfigError("tabular prompt stack has " + std::to_string(prompts.size()) +
                      " blocks for " + std::to_string(layers.size()) + " layers");
  }
  Tensor x = embed(record);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    std::optional<Tensor> p;
    if (!prompts.empty()) p = prompts[i];
    x = tab_prompt_layer_forward(layers[i], p, x);
  }
  return x;
}

AttributeEncoder::AttributeEncoder(ParameterStore& store, const std::string& prefix,
                                   AttributeSchema schema, const AttributeEncoderConfig& cfg,
                                   Initializer& init)
    : cfg_(cfg), embed_(store, prefix, std::move(schema), cfg.width, init) {
  for (std::size_t i = 0; i < cfg.depth; ++i) {
    layers_.emplace_back(store, prefix + ".layer" + std::to_string(i), cfg.width, cfg.heads,
                         cfg.ffn_hidden, init);
  }
  if (cfg.prompts > 0) {
    for (std::size_t i = 0; i < cfg.depth; ++i) {
      prompts_.push_back(store.add(prefix + ".prompt" + std::to_string(i),
                                   init.prompt({cfg.prompts, cfg.width}, cfg.width),
                                   ParamRole::Prompt));
    }
  }
}

Tensor AttributeEncoder::operator()(const AttributeRecord& record) const {
  return attribute_encoder_forward(embed_, layers_, prompts_, record);
}

}  // namespace vapf
