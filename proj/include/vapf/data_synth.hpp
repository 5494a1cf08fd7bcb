#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "vapf/attribute.hpp"
#include "vapf/metrics.hpp"
#include "vapf/volume_io.hpp"

namespace vapf {

struct Sample {
  Volume volume;
  AttributeRecord record;
  int label = 0;
};

struct Dataset {
  AttributeSchema schema = AttributeSchema::reference();
  std::vector<Sample> samples;

  std::vector<int> labels() const;
};

enum class TaskId { A, B };
char to_char(TaskId t);

/// Class-conditional generative parameters of one task.
struct TaskParams {
  /// Gaussian intensity blob: amplitude ~ N(amp_neg|amp_pos, amplitude_sd).
  double amp_neg = 1.0;
  double amp_pos = 2.0;
  double amplitude_sd = 0.9;
  /// Blob centre as a fraction of each extent, plus per-sample jitter (voxels).
  std::array<double, 3> center{0.5, 0.5, 0.5};
  double center_jitter = 1.0;
  /// Extra centre displacement of positive-class blobs (voxels).
  std::array<double, 3> pos_offset{0.0, 0.0, 4.0};
  double radius = 3.0;
  double noise_sd = 0.3;
  /// Label-driven mean shifts in units of each attribute's spread; positive
  /// raises ptau181 and ttau, lowers fdg.
  double ptau_effect = 0.6;
  double ttau_effect = 0.6;
  double fdg_effect = 0.6;
};

/// Perturbation that turns task A into task B. All-neutral values make the
/// two tasks identically distributed.
struct TaskPerturbation {
  std::array<double, 3> center_shift{0.0, 0.0, 0.0};  // voxels
  double amplitude_gap_scale = 1.0;
  double tabular_effect_scale = 1.0;
};

struct SynthConfig {
  std::array<std::size_t, 3> volume{32, 32, 32};
  std::size_t n_train = 256;
  std::size_t n_val = 64;
  std::size_t n_test = 64;
  double positive_fraction = 0.5;
  std::uint64_t seed = 0;
  TaskParams task_a;
  TaskPerturbation perturbation{{2.0, -2.0, 0.0}, 0.85, 0.85};

  std::size_t total() const { return n_train + n_val + n_test; }
  std::size_t positives() const;
  TaskParams params(TaskId task) const;
  void validate() const;

  nlohmann::json to_json() const;
  static SynthConfig from_json(const nlohmann::json& j);
};

/// Builds the whole task in memory. Sample i is drawn from its own RNG
/// stream keyed by (seed, task, i).
Dataset generate(const SynthConfig& cfg, TaskId task);

/// Writes task_A/ and task_B/ (volumes, tabular.csv, labels.csv),
/// schema.json and manifest.json under `dir`. Returns the manifest.
nlohmann::json write_dataset(const SynthConfig& cfg, const std::filesystem::path& dir);
Dataset load_task(const std::filesystem::path& dir, TaskId task);
SynthConfig load_manifest_config(const std::filesystem::path& dir);

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

/// Stratified, disjoint, seed-deterministic split. Fractions must sum to 1;
/// ConfigError if a class cannot populate every split with a nonzero share.
SplitIndices split(const std::vector<int>& labels, const std::array<double, 3>& fractions,
                   std::uint64_t seed);
/// Split using the config's train/val/test sizes as fractions.
SplitIndices split_for(const SynthConfig& cfg, const Dataset& data);

/// FNV-1a 64-bit over a byte range (manifest checksums).
std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL);

/// Closed-form unimodal references used to calibrate and compare against.
struct BaselineScores {
  EvalResult tabular;  // logistic regression on encoded attributes
  EvalResult visual;   // logistic fit on mean volume intensity
  EvalResult average;  // mean of the two probabilities
};
BaselineScores unimodal_baselines(const Dataset& data, const SplitIndices& split);

}  // namespace vapf
