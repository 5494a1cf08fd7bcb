#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "vapf/checkpoint.hpp"
#include "vapf/experiment.hpp"
#include "vapf/gradcheck.hpp"

namespace vapf {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Small model used by the built-in checks: every module and prompt family
/// present, sized to run in seconds.
ModelConfig verification_model();
/// Matching dataset for `verification_model()`.
SynthConfig verification_data();

/// Finite-difference check over every parameter of a fully prompted model.
/// Coordinates are spread round-robin over all tensors (at least `min_coords`).
CheckResult check_gradients(double tolerance, std::uint64_t seed = 0, std::size_t min_coords = 100,
                            GradCheckResult* detail = nullptr);

/// Compares every name in the fine-tuned checkpoint's freeze mask with the
/// pretrained checkpoint, byte for byte. Returns the differing names.
std::vector<std::string> frozen_mismatches(const ModelCheckpoint& pretrained,
                                           const ModelCheckpoint& finetuned);

/// Pretrains briefly, runs a prompt-tuning fine-tune of `epochs` epochs and
/// checks the frozen tensors in memory and in the saved checkpoint. With
/// `corrupt`, a frozen tensor is perturbed mid-run so the check must fail.
CheckResult check_freeze(std::size_t epochs, bool corrupt, std::uint64_t seed = 0);

/// Metric oracles, the global-prompt reductions and the prompt-free
/// reference equivalences; one result each.
std::vector<CheckResult> check_oracles(std::uint64_t seed = 0);

struct VerifyOptions {
  bool gradcheck = false;
  bool freeze = false;
  bool oracles = false;
  double tolerance = 1e-4;
  bool corrupt_frozen = false;
  std::size_t freeze_epochs = 20;
  std::uint64_t seed = 0;
};

/// Runs the selected groups (all of them if none is selected), printing one
/// line per check to `log` when given.
std::vector<CheckResult> run_verification(const VerifyOptions& opts, std::ostream* log = nullptr);

}  // namespace vapf
