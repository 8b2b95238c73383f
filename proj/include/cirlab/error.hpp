#pragma once

#include <stdexcept>
#include <string>

namespace cirlab {

/// A caller broke a documented precondition (shape mismatch, empty text, n < 2, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Invalid or inconsistent configuration. `key_path` names the offending key when known.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& message, std::string key_path = {})
      : std::runtime_error(key_path.empty() ? message : key_path + ": " + message),
        key_path_(std::move(key_path)) {}

  const std::string& key_path() const noexcept { return key_path_; }

 private:
  std::string key_path_;
};

/// Malformed input data: manifests, archives, dangling ids, bad score sheets.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cirlab
