#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vapf/checkpoint.hpp"
#include "vapf/config.hpp"
#include "vapf/data_synth.hpp"
#include "vapf/trainer.hpp"

namespace vapf {

/// Both tasks with their splits, either generated in memory or read back
/// from a gen-data directory.
struct TaskData {
  Dataset a, b;
  SplitIndices split_a, split_b;

  static TaskData generate(const SynthConfig& cfg);
  static TaskData load(const std::filesystem::path& dir);
};

/// One line of metrics.csv.
struct MetricsRow {
  std::string run_id;
  std::string strategy;
  std::uint64_t seed = 0;
  double bacc = 0.0, f1 = 0.0, auc = 0.0;
  std::size_t trainable_params = 0, total_params = 0;
};

std::string run_id(const std::string& strategy, std::uint64_t seed);

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);
/// Inserts or replaces rows by run_id and rewrites the file sorted by run_id,
/// so reruns leave identical bytes.
void upsert_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);

TrainConfig train_config(const ExperimentConfig& cfg, const StageConfig& stage, Strategy strategy,
                         std::uint64_t seed);

/// Trains the prompt-free model on task A.
ModelCheckpoint run_pretrain(const ExperimentConfig& cfg, const TaskData& data, MetricsRow* row);

struct FinetuneResult {
  ModelCheckpoint checkpoint;
  RunMetrics metrics;
  MetricsRow row;
};

/// Fine-tunes on task B from `pretrained` with the given strategy and prompt counts.
FinetuneResult run_finetune(const ExperimentConfig& cfg, const ModelCheckpoint& pretrained,
                            const TaskData& data, Strategy strategy, std::uint64_t seed,
                            const PromptCounts& counts,
                            const std::function<void(ParameterStore&, std::size_t, std::size_t)>&
                                after_step = nullptr);

/// Closed-form unimodal baselines on task B's test split as metric rows.
std::vector<MetricsRow> baseline_rows(const TaskData& data);

enum class SweepAxis { Visual, Tabular };
/// ConfigError unless "visual" or "tabular".
SweepAxis parse_axis(const std::string& s);
const char* to_string(SweepAxis a);

struct SweepRow {
  SweepAxis axis = SweepAxis::Visual;
  std::size_t count = 0;
  std::uint64_t seed = 0;
  double auc_vap = 0.0;
  double auc_vistab = 0.0;
};

/// Fine-tunes VAP and Vis-TabPrompt for every (count, seed); the other
/// prompt family stays at its reference count.
std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, const ModelCheckpoint& pretrained,
                                const TaskData& data, SweepAxis axis,
                                const std::vector<std::size_t>& counts,
                                const std::vector<std::uint64_t>& seeds);

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);
std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path);

/// Per-count mean and min-max band of one variant.
struct BandPoint {
  std::size_t count = 0;
  double mean = 0.0, min = 0.0, max = 0.0;
};
std::vector<BandPoint> sweep_band(const std::vector<SweepRow>& rows, bool vap);

/// AUC against prompt count: a shaded min-max polygon and a mean line per variant.
std::string sweep_svg(const std::vector<SweepRow>& rows);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace vapf
