#pragma once

#include "cirlab/error.hpp"
#include "cirlab/jsonl.hpp"

#include <set>
#include <string>
#include <utility>
#include <vector>

namespace cirlab {

/// Reads an object field by field and rejects any key that was never asked for.
/// Missing keys leave the destination at its default.
class StrictReader {
 public:
  StrictReader(const Json& object, std::string path) : object_(object), path_(std::move(path)) {
    if (!object_.is_object()) throw ConfigError("expected an object", path_.empty() ? "<root>" : path_);
  }

  template <typename T>
  bool read(const std::string& key, T& out) {
    known_.insert(key);
    const auto it = object_.find(key);
    if (it == object_.end()) return false;
    try {
      out = it->template get<T>();
    } catch (const Json::exception& e) {
      throw ConfigError(std::string("wrong type: ") + e.what(), key_path(key));
    }
    return true;
  }

  /// Returns the sub-object for `key`, or an empty object when absent.
  Json child(const std::string& key) {
    known_.insert(key);
    const auto it = object_.find(key);
    return it == object_.end() ? Json::object() : *it;
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : object_.items()) {
      if (!known_.contains(key)) throw ConfigError("unknown key", key_path(key));
    }
  }

 private:
  const Json& object_;
  std::string path_;
  std::set<std::string> known_;
};

}  // namespace cirlab
