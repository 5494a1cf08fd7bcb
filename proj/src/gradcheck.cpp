#include "vapf/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "vapf/errors.hpp"
#include "vapf/rng.hpp"

namespace vapf {

namespace {

double eval_value(const std::function<Tensor(ParameterStore&)>& f, ParameterStore& store,
                  const std::string& name) {
  NoGradGuard guard;
  const double v = f(store).item();
  if (!std::isfinite(v)) {
    throw NumericError("grad_check: non-finite function value while perturbing '" + name + "'");
  }
  return v;
}

}  // namespace

GradCheckResult grad_check(const std::function<Tensor(ParameterStore&)>& f, ParameterStore& store,
                           const GradCheckOptions& opts) {
  if (!(opts.h >= 1e-6 && opts.h <= 1e-3)) {
    throw ContractError("grad_check: step h must lie in [1e-6, 1e-3]");
  }
  std::vector<std::string> names = opts.subset.empty() ? store.names() : opts.subset;
  if (names.empty()) throw ContractError("grad_check: nothing to check");

  // Probed tensors must record gradients even if currently frozen.
  std::vector<bool> prev_flags;
  for (const auto& n : names) {
    prev_flags.push_back(store.get(n).requires_grad());
    store.get(n).set_requires_grad(true);
  }

  store.zero_grad();
  Tensor loss = f(store);
  if (!std::isfinite(loss.item())) throw NumericError("grad_check: non-finite loss");
  loss.backward();

  std::vector<std::vector<double>> analytic;
  for (const auto& n : names) {
    analytic.push_back(store.get(n).grad());
    for (double g : analytic.back()) {
      if (!std::isfinite(g)) throw NumericError("grad_check: non-finite gradient in '" + n + "'");
    }
  }
  store.zero_grad();

  Rng rng(opts.seed, 0x67726164ULL);
  GradCheckResult result;
  for (std::size_t k = 0; k < opts.coordinates; ++k) {
    const std::size_t which = k % names.size();
    Tensor w = store.get(names[which]);
    const std::size_t idx = static_cast<std::size_t>(rng.below(w.size()));
    const double orig = w[idx];
    w[idx] = orig + opts.h;
    const double fp = eval_value(f, store, names[which]);
    w[idx] = orig - opts.h;
    const double fm = eval_value(f, store, names[which]);
    w[idx] = orig;

    const double fd = (fp - fm) / (2.0 * opts.h);
    const double ad = analytic[which][idx];
    const double err = std::abs(ad - fd) / std::max({1.0, std::abs(ad), std::abs(fd)});
    if (result.checked == 0 || err > result.max_rel_error) {
      result.max_rel_error = err;
      result.worst_name = names[which];
      result.worst_index = idx;
    }
    ++result.checked;
  }

  for (std::size_t i = 0; i < names.size(); ++i) store.get(names[i]).set_requires_grad(prev_flags[i]);
  return result;
}

}  // namespace vapf
