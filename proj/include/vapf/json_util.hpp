#pragma once

#include <set>
#include <string>

#include <json.hpp>

#include "vapf/errors.hpp"

namespace vapf {

/// Reads fields out of a JSON object while tracking which keys were used,
/// so leftover (unknown) keys can be rejected by name.
class StrictObject {
 public:
  StrictObject(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(qualified(key) + ": wrong type");
    }
  }

  /// Sub-object, or nullptr when absent.
  const nlohmann::json* object(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string qualified(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  /// Throws ConfigError naming the first key that was never read.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown key '" + qualified(it.key()) + "'");
    }
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace vapf
