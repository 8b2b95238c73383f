#pragma once

#include "cirlab/autograd.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace cirlab {

struct NamedTensor {
  std::string name;
  ad::Matrix value;
};

/// A single-file container: structured metadata plus named dense tensors.
///
/// Layout: 8-byte magic, little-endian u64 header length, JSON header
/// {"metadata": ..., "tensors": [{"name", "rows", "cols"}]}, then every tensor's
/// values as row-major little-endian float64 in header order.
struct Archive {
  nlohmann::ordered_json metadata = nlohmann::ordered_json::object();
  std::vector<NamedTensor> tensors;

  const ad::Matrix& at(const std::string& name) const;
  bool contains(const std::string& name) const;
};

void write_archive(const std::filesystem::path& path, const Archive& archive);
Archive read_archive(const std::filesystem::path& path);

}  // namespace cirlab
