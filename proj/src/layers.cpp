#include "vapf/layers.hpp"

#include <cmath>
#include <vector>

#include "vapf/errors.hpp"

namespace vapf {

namespace {
double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }
}  // namespace

Tensor Initializer::weight(Shape shape) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = to_f32(rng_.truncated_normal(0.02));
  return t;
}

Tensor Initializer::zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }
Tensor Initializer::ones(Shape shape) { return Tensor(std::move(shape), 1.0); }

Tensor Initializer::prompt(Shape shape, std::size_t width) {
  Tensor t(std::move(shape));
  const double s = 1.0 / std::sqrt(static_cast<double>(width));
  for (auto& v : t.data()) v = to_f32(rng_.uniform(-0.5, 0.5) * s);
  return t;
}

Linear::Linear(ParameterStore& store, const std::string& prefix, std::size_t in, std::size_t out,
               Initializer& init, ParamRole role)
    : weight(store.add(prefix + ".w", init.weight({in, out}), role)),
      bias(store.add(prefix + ".b", init.zeros({out}), role)) {}

LayerNorm::LayerNorm(ParameterStore& store, const std::string& prefix, std::size_t width,
                     Initializer& init, ParamRole role)
    : gamma(store.add(prefix + ".gamma", init.ones({width}), role)),
      beta(store.add(prefix + ".beta", init.zeros({width}), role)) {}

FeedForward::FeedForward(ParameterStore& store, const std::string& prefix, std::size_t width,
                         std::size_t hidden, Initializer& init)
    : fc1(store, prefix + ".fc1", width, hidden, init),
      fc2(store, prefix + ".fc2", hidden, width, init) {}

MultiHeadAttention::MultiHeadAttention(ParameterStore& store, const std::string& prefix,
                                       std::size_t width, std::size_t heads_, Initializer& init)
    : q(store, prefix + ".q", width, width, init),
      k(store, prefix + ".k", width, width, init),
      v(store, prefix + ".v", width, width, init),
      out(store, prefix + ".out", width, width, init),
      heads(heads_) {
  if (heads == 0 || width % heads != 0) {
    throw ConfigError("attention: head count " + std::to_string(heads) + " does not divide width " +
                      std::to_string(width));
  }
}

Tensor MultiHeadAttention::operator()(const Tensor& x) const {
  const std::size_t width = x.dim(1);
  const std::size_t dh = width / heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  Tensor qa = q(x), ka = k(x), va = v(x);
  if (heads == 1) {
    Tensor a = ops::softmax(ops::scale(ops::matmul(qa, ops::transpose(ka)), inv), 1);
    return out(ops::matmul(a, va));
  }
  const std::vector<std::size_t> sizes(heads, dh);
  auto qs = ops::split(qa, 1, sizes);
  auto ks = ops::split(ka, 1, sizes);
  auto vs = ops::split(va, 1, sizes);
  std::vector<Tensor> parts;
  parts.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor a = ops::softmax(ops::scale(ops::matmul(qs[h], ops::transpose(ks[h])), inv), 1);
    parts.push_back(ops::matmul(a, vs[h]));
  }
  return out(ops::concat(parts, 1));
}

TransformerLayer::TransformerLayer(ParameterStore& store, const std::string& prefix,
                                   std::size_t width, std::size_t heads, std::size_t ffn_hidden,
                                   Initializer& init)
    : ln1(store, prefix + ".ln1", width, init),
      ln2(store, prefix + ".ln2", width, init),
      attn(store, prefix + ".attn", width, heads, init),
      ffn(store, prefix + ".ffn", width, ffn_hidden, init) {}

Tensor TransformerLayer::operator()(const Tensor& x) const {
  Tensor h = ops::add(x, attn(ln1(x)));
  return ops::add(h, ffn(ln2(h)));
}

}  // namespace vapf
