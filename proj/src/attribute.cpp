#include "vapf/attribute.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "vapf/errors.hpp"

namespace vapf {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw InputError("cannot parse '" + s + "' as a number for " + what);
  }
  return v;
}

}  // namespace

AttributeSchema AttributeSchema::reference() {
  using K = AttributeKind;
  AttributeSchema s;
  s.attributes = {
      {"age", K::Numerical, 0, 55.0, 90.0},
      {"gender", K::Categorical, 2, 0.0, 0.0},
      {"education", K::Numerical, 0, 6.0, 20.0},
      {"apoe4", K::Categorical, 3, 0.0, 0.0},
      {"ptau181", K::Numerical, 0, 5.0, 60.0},
      {"ttau", K::Numerical, 0, 80.0, 500.0},
      {"fdg", K::Numerical, 0, 0.8, 1.6},
  };
  return s;
}

void AttributeSchema::validate() const {
  if (attributes.size() != kAttributeCount) {
    throw ConfigError("schema: expected 7 attributes, got " + std::to_string(attributes.size()));
  }
  for (const auto& a : attributes) {
    if (a.name.empty()) throw ConfigError("schema: attribute with empty name");
    if (a.name == "label") throw ConfigError("schema: 'label' is reserved");
    if (a.kind == AttributeKind::Categorical && a.cardinality < 2) {
      throw ConfigError("schema: categorical attribute '" + a.name + "' needs cardinality >= 2");
    }
    if (a.kind == AttributeKind::Numerical && !(a.min < a.max)) {
      throw ConfigError("schema: numerical attribute '" + a.name + "' needs min < max");
    }
  }
  for (std::size_t i = 0; i < attributes.size(); ++i)
    for (std::size_t j = i + 1; j < attributes.size(); ++j)
      if (attributes[i].name == attributes[j].name)
        throw ConfigError("schema: duplicate attribute '" + attributes[i].name + "'");
}

std::size_t AttributeSchema::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < attributes.size(); ++i)
    if (attributes[i].name == name) return i;
  throw InputError("schema has no attribute '" + name + "'");
}

nlohmann::json AttributeSchema::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& a : attributes) {
    nlohmann::json j;
    j["name"] = a.name;
    if (a.kind == AttributeKind::Categorical) {
      j["kind"] = "categorical";
      j["cardinality"] = a.cardinality;
    } else {
      j["kind"] = "numerical";
      j["min"] = a.min;
      j["max"] = a.max;
    }
    arr.push_back(std::move(j));
  }
  return nlohmann::json{{"attributes", arr}};
}

AttributeSchema AttributeSchema::from_json(const nlohmann::json& j) {
  AttributeSchema s;
  try {
    for (const auto& item : j.at("attributes")) {
      AttributeDescriptor d;
      d.name = item.at("name").get<std::string>();
      const auto kind = item.at("kind").get<std::string>();
      if (kind == "categorical") {
        d.kind = AttributeKind::Categorical;
        d.cardinality = item.at("cardinality").get<std::size_t>();
      } else if (kind == "numerical") {
        d.kind = AttributeKind::Numerical;
        d.min = item.at("min").get<double>();
        d.max = item.at("max").get<double>();
      } else {
        throw ConfigError("schema: attribute '" + d.name + "' has unknown kind '" + kind + "'");
      }
      s.attributes.push_back(std::move(d));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("schema: ") + e.what());
  }
  s.validate();
  return s;
}

void AttributeSchema::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write schema " + path.string());
  os << to_json().dump(2) << '\n';
}

AttributeSchema AttributeSchema::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read schema " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("schema " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

double min_max_normalize(double value, const AttributeDescriptor& d, bool* clamped) {
  double v = (value - d.min) / (d.max - d.min);
  const bool out = v < 0.0 || v > 1.0;
  if (clamped) *clamped = out;
  return std::clamp(v, 0.0, 1.0);
}

void write_tabular_csv(const std::filesystem::path& path, const AttributeSchema& schema,
                       const std::vector<TabularRow>& rows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  for (const auto& a : schema.attributes) os << a.name << ',';
  os << "label\n";
  for (const auto& r : rows) {
    for (double v : r.record.values) os << format_double(v) << ',';
    os << r.label << '\n';
  }
  if (!os) throw IoError("write failed for " + path.string());
}

std::vector<TabularRow> read_tabular_csv(const std::filesystem::path& path,
                                         const AttributeSchema& schema) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw InputError(path.string() + ": missing header row");
  const auto header = split_csv_line(line);

  // column index for each schema attribute, then the label column
  std::vector<std::size_t> cols;
  for (const auto& a : schema.attributes) {
    auto it = std::find(header.begin(), header.end(), a.name);
    if (it == header.end()) throw InputError(path.string() + ": header lacks '" + a.name + "'");
    cols.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  auto lit = std::find(header.begin(), header.end(), "label");
  if (lit == header.end()) throw InputError(path.string() + ": header lacks 'label'");
  const auto label_col = static_cast<std::size_t>(lit - header.begin());

  std::vector<TabularRow> rows;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " cells");
    }
    TabularRow row;
    for (std::size_t i = 0; i < cols.size(); ++i) {
      row.record.values.push_back(parse_double(cells[cols[i]], schema.attributes[i].name));
    }
    const double label = parse_double(cells[label_col], "label");
    if (label != 0.0 && label != 1.0) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": label must be 0 or 1");
    }
    row.label = static_cast<int>(label);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace vapf
