#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vapf/tensor.hpp"

// Differentiable tensor operations. Every op validates shapes and throws
// ShapeError naming the offending shapes.
namespace vapf::ops {

/// (m,k)·(k,n); (b,m,k)·(b,k,n); (b,m,k)·(k,n) broadcasts the right operand.
Tensor matmul(const Tensor& a, const Tensor& b);
/// Rank-2 transpose.
Tensor transpose(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double s);

/// Adds a vector of extent x.shape().back() to every row of x.
Tensor add_row(const Tensor& x, const Tensor& v);
/// Multiplies every row of x elementwise by a vector of extent x.shape().back().
Tensor mul_row(const Tensor& x, const Tensor& v);

/// tanh approximation.
Tensor gelu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
std::vector<Tensor> split(const Tensor& x, std::size_t axis, const std::vector<std::size_t>& sizes);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);
Tensor flatten(const Tensor& x);

/// Numerically stable softmax along `axis` (max subtracted first).
Tensor softmax(const Tensor& x, std::size_t axis);

/// Normalizes over the last axis with population variance. Rows whose
/// entries are all equal normalize to exactly zero, so the output is beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

/// Mean over the batch of the stable binary cross-entropy
/// max(z,0) - z*y + log1p(exp(-|z|)). `logits` holds one value per label.
Tensor bce_with_logits(const Tensor& logits, std::span<const double> labels);

/// out[i] = x[index[i]]; the backward pass scatter-adds.
Tensor gather(const Tensor& x, std::vector<std::size_t> index, Shape out_shape);

// Scalar helpers shared with reference implementations.
double gelu_value(double x);
double gelu_derivative(double x);

}  // namespace vapf::ops
