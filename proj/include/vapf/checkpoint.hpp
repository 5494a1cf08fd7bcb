#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "vapf/parameter_store.hpp"

namespace vapf {

struct CheckpointTensor {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

enum class LoadPolicy {
  /// Every model parameter must be present with a matching shape.
  Strict,
  /// Backbone and head must be present; prompt and global-transform
  /// parameters keep their fresh initialization.
  BackboneOnly,
};

/// Named float32 tensors plus freeze mask, config echo and metric snapshot.
///
/// File layout (`vapf-v1`, all integers little-endian):
///   8 bytes   magic "VAPFCKPT"
///   u32       version (1)
///   u64       header length in bytes
///   header    UTF-8 JSON: {"tensors": {name: {"shape", "offset", "dtype": "f32"}},
///             "freeze_mask", "config", "metrics"}
///   payload   contiguous float32 values; offsets are in bytes from payload start
/// Float64 parameters are rounded to float32 on capture.
struct ModelCheckpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::vector<CheckpointTensor> tensors;
  std::set<std::string> freeze_mask;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json metrics = nlohmann::json::object();

  static ModelCheckpoint capture(const ParameterStore& store,
                                 nlohmann::json config = nlohmann::json::object(),
                                 nlohmann::json metrics = nlohmann::json::object());

  const CheckpointTensor* find(const std::string& name) const;

  /// Copies values into the store. Throws CheckpointError listing every
  /// missing (or shape-mismatched) parameter name.
  void load_into(ParameterStore& store, LoadPolicy policy = LoadPolicy::Strict) const;

  std::vector<char> serialize() const;
  static ModelCheckpoint deserialize(const std::vector<char>& bytes);
  void save(const std::filesystem::path& path) const;
  static ModelCheckpoint load(const std::filesystem::path& path);
};

}  // namespace vapf
