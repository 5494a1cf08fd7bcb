#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vapf/parameter_store.hpp"

namespace vapf {

struct AdamWOptions {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// AdamW with decoupled weight decay. Moments are kept only for parameters
/// that are trainable at step time; frozen parameters are never touched.
class AdamW {
 public:
  explicit AdamW(AdamWOptions opts = {}) : opts_(opts) {}

  /// Applies one update and clears all gradients. Throws ContractError if a
  /// trainable parameter has no accumulated gradient.
  void step(ParameterStore& store);

  double lr() const { return opts_.lr; }
  void set_lr(double lr) { opts_.lr = lr; }
  const AdamWOptions& options() const { return opts_; }
  std::uint64_t steps() const { return t_; }
  bool has_state(const std::string& name) const { return moments_.count(name) != 0; }

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  AdamWOptions opts_;
  std::uint64_t t_ = 0;
  std::map<std::string, Moments> moments_;
};

struct PlateauOptions {
  double factor = 0.1;
  int patience = 3;
  double floor = 1e-8;
  double min_delta = 1e-4;
};

/// Maximizing ReduceLROnPlateau: after `patience` epochs without an
/// improvement larger than min_delta over the best value, lr *= factor.
class ReduceLROnPlateau {
 public:
  ReduceLROnPlateau(double initial_lr, PlateauOptions opts = {});

  /// Records one epoch's metric and returns the learning rate to use next.
  double step(double metric);
  double lr() const { return lr_; }
  double best() const { return best_; }

 private:
  PlateauOptions opts_;
  double lr_;
  double best_;
  bool has_best_ = false;
  int bad_epochs_ = 0;
};

}  // namespace vapf
