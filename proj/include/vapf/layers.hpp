#pragma once

#include <cstddef>
#include <string>

#include "vapf/ops.hpp"
#include "vapf/parameter_store.hpp"
#include "vapf/rng.hpp"

namespace vapf {

/// Draws initial parameter values. Every value is rounded to float32 so a
/// freshly built model survives a checkpoint round-trip unchanged.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed, 0x696E6974ULL) {}

  /// Truncated normal, std 0.02.
  Tensor weight(Shape shape);
  Tensor zeros(Shape shape);
  Tensor ones(Shape shape);
  /// uniform(-0.5, 0.5) / sqrt(width)
  Tensor prompt(Shape shape, std::size_t width);

 private:
  Rng rng_;
};

struct Linear {
  Tensor weight;  // in x out
  Tensor bias;    // out

  Linear() = default;
  Linear(ParameterStore& store, const std::string& prefix, std::size_t in, std::size_t out,
         Initializer& init, ParamRole role = ParamRole::Backbone);
  Tensor operator()(const Tensor& x) const { return ops::add_row(ops::matmul(x, weight), bias); }
};

struct LayerNorm {
  Tensor gamma, beta;
  double eps = 1e-5;

  LayerNorm() = default;
  LayerNorm(ParameterStore& store, const std::string& prefix, std::size_t width,
            Initializer& init, ParamRole role = ParamRole::Backbone);
  Tensor operator()(const Tensor& x) const { return ops::layer_norm(x, gamma, beta, eps); }
};

struct FeedForward {
  Linear fc1, fc2;

  FeedForward() = default;
  FeedForward(ParameterStore& store, const std::string& prefix, std::size_t width,
              std::size_t hidden, Initializer& init);
  Tensor operator()(const Tensor& x) const { return fc2(ops::gelu(fc1(x))); }
};

/// Multi-head scaled dot-product self-attention over the rows of a T x C
/// sequence.
struct MultiHeadAttention {
  Linear q, k, v, out;
  std::size_t heads = 1;

  MultiHeadAttention() = default;
  MultiHeadAttention(ParameterStore& store, const std::string& prefix, std::size_t width,
                     std::size_t heads, Initializer& init);
  Tensor operator()(const Tensor& x) const;
};

/// Pre-norm transformer layer: x + MHA(LN(x)), then + FFN(LN(.)).
struct TransformerLayer {
  LayerNorm ln1, ln2;
  MultiHeadAttention attn;
  FeedForward ffn;

  TransformerLayer() = default;
  TransformerLayer(ParameterStore& store, const std::string& prefix, std::size_t width,
                   std::size_t heads, std::size_t ffn_hidden, Initializer& init);
  Tensor operator()(const Tensor& x) const;
};

}  // namespace vapf
