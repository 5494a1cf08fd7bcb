#pragma once

#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "vapf/checkpoint.hpp"
#include "vapf/data_synth.hpp"
#include "vapf/metrics.hpp"
#include "vapf/model.hpp"
#include "vapf/optim.hpp"

namespace vapf {

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 4;
  double lr = 1e-5;
  double weight_decay = 0.01;
  PlateauOptions plateau;
  std::uint64_t seed = 0;
  Strategy strategy = Strategy::FT;
  /// Evaluation workers; training itself is single-threaded.
  std::size_t threads = 1;
  /// Called after every optimizer step (test hook).
  std::function<void(ParameterStore&, std::size_t epoch, std::size_t step)> after_step;

  void validate() const;
};

/// Names to freeze for a strategy. FT freezes nothing; every prompt-tuning
/// variant freezes all parameters except prompts, global-transform weights
/// and the FC head. ConfigError if a prompt variant meets a prompt-free store.
std::set<std::string> build_freeze_mask(Strategy strategy, const ParameterStore& store);

/// Sigmoid probabilities for the given samples, in index order. Inference
/// fans out over `threads` workers; results do not depend on the count.
std::vector<double> predict(const VapFormer& model, const Dataset& data,
                            const std::vector<std::size_t>& indices, std::size_t threads = 1);
EvalResult evaluate(const VapFormer& model, const Dataset& data,
                    const std::vector<std::size_t>& indices, std::size_t threads = 1);

struct EpochRecord {
  double train_loss = 0.0;
  double val_auc = 0.0;
  double lr = 0.0;
};

struct FitReport {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_auc = 0.0;
};

/// Mini-batch AdamW on BCE over the trainable parameters with plateau
/// scheduling on validation AUC. On return the model holds the best
/// validation state, rounded to float32 so it checkpoints exactly.
/// NumericError on a non-finite loss.
FitReport fit(VapFormer& model, const Dataset& data, const SplitIndices& split,
              const TrainConfig& cfg);

/// Full training of the prompt-free model on task A.
ModelCheckpoint pretrain(VapFormer& model, const Dataset& data, const SplitIndices& split,
                         const TrainConfig& cfg, FitReport* report = nullptr);

struct RunMetrics {
  MetricSummary test;
  double val_auc = 0.0;
  std::size_t trainable_params = 0;
  std::size_t total_params = 0;
};

/// Loads backbone + head from `pretrained` (prompts and global transforms
/// stay freshly initialized), applies the strategy's freeze mask, trains on
/// task B and reports held-out metrics.
ModelCheckpoint finetune(VapFormer& model, const ModelCheckpoint& pretrained, const Dataset& data,
                         const SplitIndices& split, const TrainConfig& cfg, RunMetrics* metrics,
                         FitReport* report = nullptr);

nlohmann::json to_json(const RunMetrics& m);

}  // namespace vapf
