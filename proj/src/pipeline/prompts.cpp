#include "cirlab/pipeline/prompts.hpp"

#include "cirlab/error.hpp"
#include "cirlab/hashing.hpp"
#include "cirlab/jsonl.hpp"
#include "cirlab/text.hpp"

#include <cstdlib>

namespace cirlab::data {

namespace {

void replace_all(std::string& text, std::string_view slot, std::string_view value) {
  for (std::size_t pos = text.find(slot); pos != std::string::npos; pos = text.find(slot, pos + value.size()))
    text.replace(pos, slot.size(), value);
}

std::string strip_trailing_newlines(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

}  // namespace

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir) {
  PromptLibrary lib;
  lib.caption_template = strip_trailing_newlines(read_text_file(dir / "caption_template.txt"));
  lib.synthesis_instructions = strip_trailing_newlines(read_text_file(dir / "synthesis_instructions.txt"));
  const Json examples = read_json_file(dir / "synthesis_examples.json");
  if (!examples.is_array() || examples.size() != 2)
    throw DataError((dir / "synthesis_examples.json").string() + " must hold exactly two examples");
  for (const auto& e : examples) {
    lib.examples.push_back({e.at("reference").get<std::string>(), e.at("target").get<std::string>(),
                            e.at("modification").get<std::string>()});
  }
  for (const char* slot : {"{category}", "{description}", "{attributes}"})
    if (lib.caption_template.find(slot) == std::string::npos)
      throw DataError("caption template is missing the " + std::string(slot) + " slot");
  return lib;
}

std::string PromptLibrary::caption_prompt(const ImageRecord& record) const {
  std::string attributes;
  for (const auto& [key, value] : record.attributes) attributes += (attributes.empty() ? "" : "; ") + key + ": " + value;
  const std::string description = record.web_caption ? trim(*record.web_caption) : std::string();
  std::string prompt = caption_template;
  replace_all(prompt, "{category}", record.category);
  replace_all(prompt, "{description}", description.empty() ? "(none)" : description);
  replace_all(prompt, "{attributes}", attributes.empty() ? "(none)" : attributes);
  return prompt;
}

std::string PromptLibrary::synthesis_prompt(std::string_view reference_caption, std::string_view target_caption) const {
  std::string prompt = synthesis_instructions + "\n";
  for (std::size_t i = 0; i < examples.size(); ++i) {
    prompt += "\nExample " + std::to_string(i + 1) + "\n";
    prompt += "Reference: " + examples[i].reference + "\n";
    prompt += "Target: " + examples[i].target + "\n";
    prompt += "Modification: " + examples[i].modification + "\n";
  }
  prompt += "\nReference: " + trim(reference_caption) + "\n";
  prompt += "Target: " + trim(target_caption) + "\n";
  prompt += "Modification:";
  return prompt;
}

std::filesystem::path default_prompt_dir() {
  if (const char* dir = std::getenv("CIRLAB_PROMPTS_DIR"); dir != nullptr && *dir != '\0') return dir;
  return std::filesystem::path(CIRLAB_DATA_DIR) / "prompts";
}

std::string prompt_fingerprint(std::string_view prompt) { return sha256_hex(prompt); }

}  // namespace cirlab::data
