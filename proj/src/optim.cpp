#include "vapf/optim.hpp"

#include <algorithm>
#include <cmath>

#include "vapf/errors.hpp"

namespace vapf {

void AdamW::step(ParameterStore& store) {
  for (const auto& e : store.entries()) {
    if (!store.is_frozen(e.name) && !e.tensor.has_grad()) {
      throw ContractError("AdamW step: trainable parameter '" + e.name + "' has no gradient");
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
  for (const auto& e : store.entries()) {
    if (store.is_frozen(e.name)) continue;
    Tensor w = e.tensor;
    auto& mo = moments_[e.name];
    if (mo.m.empty()) {
      mo.m.assign(w.size(), 0.0);
      mo.v.assign(w.size(), 0.0);
    }
    auto wd = w.data();
    auto g = w.grad_buffer();
    for (std::size_t i = 0; i < wd.size(); ++i) {
      mo.m[i] = opts_.beta1 * mo.m[i] + (1.0 - opts_.beta1) * g[i];
      mo.v[i] = opts_.beta2 * mo.v[i] + (1.0 - opts_.beta2) * g[i] * g[i];
      const double mhat = mo.m[i] / bc1;
      const double vhat = mo.v[i] / bc2;
      wd[i] *= 1.0 - opts_.lr * opts_.weight_decay;
      wd[i] -= opts_.lr * mhat / (std::sqrt(vhat) + opts_.eps);
    }
  }
  store.zero_grad();
}

ReduceLROnPlateau::ReduceLROnPlateau(double initial_lr, PlateauOptions opts)
    : opts_(opts), lr_(initial_lr), best_(0.0) {}

double ReduceLROnPlateau::step(double metric) {
  if (!has_best_ || metric > best_ + opts_.min_delta) {
    best_ = has_best_ ? std::max(best_, metric) : metric;
    has_best_ = true;
    bad_epochs_ = 0;
    return lr_;
  }
  if (++bad_epochs_ >= opts_.patience) {
    lr_ = std::max(lr_ * opts_.factor, opts_.floor);
    bad_epochs_ = 0;
  }
  return lr_;
}

}  // namespace vapf
