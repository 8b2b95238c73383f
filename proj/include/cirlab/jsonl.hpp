#pragma once

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace cirlab {

using Json = nlohmann::ordered_json;

/// Reads a line-delimited JSON file; blank lines are skipped. Parse errors name the line.
std::vector<Json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& records);

Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

/// Append-only single-writer line sink.
class JsonlAppender {
 public:
  explicit JsonlAppender(const std::filesystem::path& path, bool truncate = false);
  void append(const Json& record);

 private:
  std::ofstream out_;
};

}  // namespace cirlab
