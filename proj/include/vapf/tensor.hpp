#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace vapf {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  // Empty means "no gradient accumulated"; reads as all-zero.
  std::vector<double> grad;
  bool requires_grad = false;

  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into parents that require grad.
  std::function<void(Node&)> backward;

  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

/// Dense row-major float64 tensor with reverse-mode autodiff.
///
/// A Tensor is a handle: copies share storage and gradient. Operations in
/// ops.hpp record a backward closure on the result whenever grad mode is on
/// and at least one input requires grad.
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return node_->data.size(); }

  std::span<double> data() { return node_->data; }
  std::span<const double> data() const { return node_->data; }
  double item() const;
  double& operator[](std::size_t i) { return node_->data[i]; }
  double operator[](std::size_t i) const { return node_->data[i]; }
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  bool has_grad() const { return !node_->grad.empty(); }
  /// Gradient values; all zeros when nothing was accumulated.
  std::vector<double> grad() const;
  std::span<double> grad_buffer() { return node_->grad_buffer(); }
  void zero_grad() { node_->grad.clear(); }

  /// Runs reverse-mode accumulation from this scalar. Nodes are visited in
  /// reverse topological order of a deterministic DFS, so accumulation
  /// order (and hence every bit of the result) is fixed.
  void backward();

  /// Detached copy of the values.
  Tensor clone() const;
  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  // Used by ops.cpp to build graph nodes.
  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Thread-local switch for graph recording.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

}  // namespace vapf
