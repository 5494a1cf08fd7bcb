#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "vapf/data_synth.hpp"
#include "vapf/model.hpp"
#include "vapf/optim.hpp"

namespace vapf {

struct StageConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 4;
  double lr = 1e-4;
  /// Learning rate of the original full-scale protocol; recorded only.
  double reference_lr = 1e-5;
  double weight_decay = 0.01;
};

/// Everything one experiment needs, loaded from a single JSON file.
/// Unknown keys are rejected by name.
struct ExperimentConfig {
  ModelConfig model;
  PromptCounts prompts;
  SynthConfig data;
  StageConfig pretrain{30, 4, 1e-4, 1e-5, 0.01};
  StageConfig finetune{20, 4, 1e-4, 1e-5, 0.01};
  PlateauOptions scheduler;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::string out = "runs";
  double gradcheck_tolerance = 1e-4;

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  /// ConfigError for malformed JSON or schema violations, IoError if unreadable.
  static ExperimentConfig load(const std::filesystem::path& path);
};

/// Evaluation worker count from VAPF_THREADS (default 1).
std::size_t threads_from_env();

}  // namespace vapf
