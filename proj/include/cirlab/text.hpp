#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace cirlab {

/// Lowercases and splits on whitespace and ASCII punctuation. Used both for the
/// model's text pathway and for dataset vocabulary statistics.
std::vector<std::string> tokenize_words(std::string_view text);

/// Whitespace-separated word count (used for caption length limits).
std::size_t count_whitespace_tokens(std::string_view text);

/// Keeps the first `max_tokens` whitespace-separated words, joined by single spaces.
std::string truncate_whitespace_tokens(std::string_view text, std::size_t max_tokens);

std::string trim(std::string_view text);
std::string to_lower(std::string_view text);

}  // namespace cirlab
