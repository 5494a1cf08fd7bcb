#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vapf/parameter_store.hpp"

namespace vapf {

struct GradCheckOptions {
  double h = 1e-5;
  std::size_t coordinates = 100;
  std::uint64_t seed = 0;
  /// Parameters to probe; empty means every parameter in the store.
  std::vector<std::string> subset;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_name;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

/// Compares reverse-mode gradients of a scalar function against central
/// differences (f(w+h) - f(w-h)) / 2h on randomly sampled coordinates.
/// Coordinates are drawn round-robin over the subset so every named tensor
/// is covered. The error of one coordinate is
/// |g_ad - g_fd| / max(1, |g_ad|, |g_fd|).
GradCheckResult grad_check(const std::function<Tensor(ParameterStore&)>& f, ParameterStore& store,
                           const GradCheckOptions& opts = {});

}  // namespace vapf
