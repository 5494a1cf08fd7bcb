#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "vapf/tensor.hpp"

namespace vapf {

/// What a parameter is for; drives the prompt-tuning freeze policy.
enum class ParamRole {
  Backbone,
  Prompt,
  GlobalTransform,
  Head,
};

const char* to_string(ParamRole role);

struct ParamEntry {
  std::string name;
  Tensor tensor;
  ParamRole role = ParamRole::Backbone;
};

/// Ordered, uniquely-named collection of trainable tensors plus the set of
/// names that are frozen. Iteration follows registration order.
class ParameterStore {
 public:
  /// Registers a leaf tensor. Throws ContractError on a duplicate name.
  Tensor& add(const std::string& name, Tensor tensor, ParamRole role = ParamRole::Backbone);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  ParamRole role(const std::string& name) const;

  const std::vector<ParamEntry>& entries() const { return entries_; }
  std::vector<std::string> names() const;
  std::size_t size() const { return entries_.size(); }

  /// Replaces the freeze mask; every name must exist. Frozen tensors stop
  /// requiring grad, trainable ones start.
  void set_freeze_mask(const std::set<std::string>& frozen);
  const std::set<std::string>& freeze_mask() const { return frozen_; }
  bool is_frozen(const std::string& name) const { return frozen_.count(name) != 0; }

  std::size_t total_count() const;
  std::size_t trainable_count() const;
  std::size_t frozen_count() const { return total_count() - trainable_count(); }

  void zero_grad();

  /// Copies values in from another store with identical names and shapes.
  void copy_values_from(const ParameterStore& other);

 private:
  std::vector<ParamEntry> entries_;
  std::map<std::string, std::size_t> index_;
  std::set<std::string> frozen_;
};

}  // namespace vapf
