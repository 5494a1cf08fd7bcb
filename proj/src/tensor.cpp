#include "vapf/tensor.hpp"

#include <sstream>
#include <unordered_set>

#include "vapf/errors.hpp"

namespace vapf {

namespace {
thread_local bool t_grad_enabled = true;
}

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

Tensor::Tensor() : Tensor(Shape{1}) {}

Tensor::Tensor(Shape shape, double fill, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
  for (auto d : shape) {
    if (d == 0) throw ShapeError("zero extent in shape " + shape_str(shape));
  }
  node_->data.assign(numel(shape), fill);
  node_->shape = std::move(shape);
  node_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
  if (numel(shape) != data.size()) {
    throw ShapeError("shape " + shape_str(shape) + " does not hold " +
                     std::to_string(data.size()) + " values");
  }
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<double>{v}, requires_grad);
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged rows in from_rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor(Shape{r, c}, std::move(data));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape()));
  }
  return node_->shape[axis];
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  if (rank() != 2) throw ShapeError("at(row, col) needs rank 2, got " + shape_str(shape()));
  return node_->data[row * node_->shape[1] + col];
}

std::vector<double> Tensor::grad() const {
  if (node_->grad.empty()) return std::vector<double>(node_->data.size(), 0.0);
  return node_->grad;
}

Tensor Tensor::clone() const { return Tensor(node_->shape, node_->data); }

void Tensor::backward() {
  if (size() != 1) throw ShapeError("backward() needs a scalar, got " + shape_str(shape()));
  if (!node_->requires_grad) return;

  // Iterative post-order DFS; parents are pushed in declaration order.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node* p = n->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = prev_; }

}  // namespace vapf
