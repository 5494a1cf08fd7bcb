#include "vapf/parameter_store.hpp"

#include <algorithm>

#include "vapf/errors.hpp"

namespace vapf {

const char* to_string(ParamRole role) {
  switch (role) {
    case ParamRole::Backbone:
      return "backbone";
    case ParamRole::Prompt:
      return "prompt";
    case ParamRole::GlobalTransform:
      return "global_transform";
    case ParamRole::Head:
      return "head";
  }
  return "?";
}

Tensor& ParameterStore::add(const std::string& name, Tensor tensor, ParamRole role) {
  if (contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
  tensor.set_requires_grad(true);
  index_.emplace(name, entries_.size());
  entries_.push_back(ParamEntry{name, std::move(tensor), role});
  return entries_.back().tensor;
}

Tensor& ParameterStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
  return entries_[it->second].tensor;
}

const Tensor& ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
  return entries_[it->second].tensor;
}

ParamRole ParameterStore::role(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
  return entries_[it->second].role;
}

std::vector<std::string> ParameterStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.name);
  return out;
}

void ParameterStore::set_freeze_mask(const std::set<std::string>& frozen) {
  for (const auto& n : frozen) {
    if (!contains(n)) throw ContractError("freeze mask names unknown parameter '" + n + "'");
  }
  frozen_ = frozen;
  for (auto& e : entries_) e.tensor.set_requires_grad(!frozen_.count(e.name));
}

std::size_t ParameterStore::total_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.size();
  return n;
}

std::size_t ParameterStore::trainable_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) {
    if (!frozen_.count(e.name)) n += e.tensor.size();
  }
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

void ParameterStore::copy_values_from(const ParameterStore& other) {
  for (auto& e : entries_) {
    const Tensor& src = other.get(e.name);
    if (src.shape() != e.tensor.shape()) {
      throw ShapeError("parameter '" + e.name + "' shape " + shape_str(e.tensor.shape()) +
                       " vs " + shape_str(src.shape()));
    }
    std::ranges::copy(src.data(), e.tensor.data().begin());
  }
}

}  // namespace vapf
