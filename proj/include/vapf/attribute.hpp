#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace vapf {

enum class AttributeKind { Categorical, Numerical };

struct AttributeDescriptor {
  std::string name;
  AttributeKind kind = AttributeKind::Numerical;
  std::size_t cardinality = 0;  // categorical only
  double min = 0.0, max = 1.0;  // numerical only
};

/// The seven clinical attributes: which are one-hot encoded and which are
/// min-max scaled, and over what domain.
struct AttributeSchema {
  static constexpr std::size_t kAttributeCount = 7;

  std::vector<AttributeDescriptor> attributes;

  /// age, gender, education, apoe4, ptau181, ttau, fdg.
  static AttributeSchema reference();

  /// Throws ConfigError unless there are exactly 7 attributes, categorical
  /// cardinalities are >= 2 and numerical domains have min < max.
  void validate() const;
  std::size_t index_of(const std::string& name) const;

  nlohmann::json to_json() const;
  static AttributeSchema from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static AttributeSchema load(const std::filesystem::path& path);
};

/// One subject's attribute values in schema order. Categorical attributes
/// hold their level index as an integral double.
struct AttributeRecord {
  std::vector<double> values;
};

/// Min-max scaling clamped to [0, 1]. Sets *clamped when clamping happened.
double min_max_normalize(double value, const AttributeDescriptor& d, bool* clamped = nullptr);
/// Shortest decimal that round-trips the double.
std::string format_double(double v);

struct TabularRow {
  AttributeRecord record;
  int label = 0;
};

/// Writes `name_1,...,name_7,label` followed by one row per subject.
void write_tabular_csv(const std::filesystem::path& path, const AttributeSchema& schema,
                       const std::vector<TabularRow>& rows);
/// Reads a CSV whose header names all schema attributes plus `label`, in any
/// column order. Throws InputError on malformed content, IoError if unreadable.
std::vector<TabularRow> read_tabular_csv(const std::filesystem::path& path,
                                         const AttributeSchema& schema);

}  // namespace vapf
