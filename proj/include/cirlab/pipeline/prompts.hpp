#pragma once

#include "cirlab/pipeline/records.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cirlab::data {

/// Prompt texts live in data files so they can be versioned and reviewed:
///   caption_template.txt       with {category}, {description} and {attributes} slots
///   synthesis_instructions.txt
///   synthesis_examples.json    exactly two {reference, target, modification} objects
struct PromptLibrary {
  struct Example {
    std::string reference;
    std::string target;
    std::string modification;
  };

  std::string caption_template;
  std::string synthesis_instructions;
  std::vector<Example> examples;

  static PromptLibrary load(const std::filesystem::path& dir);

  /// Missing description or attributes are rendered as "(none)".
  std::string caption_prompt(const ImageRecord& record) const;
  std::string synthesis_prompt(std::string_view reference_caption, std::string_view target_caption) const;
};

/// $CIRLAB_PROMPTS_DIR when set, otherwise the prompts shipped with the source tree.
std::filesystem::path default_prompt_dir();

/// SHA-256 of the exact prompt bytes.
std::string prompt_fingerprint(std::string_view prompt);

}  // namespace cirlab::data
