#include "cirlab/text.hpp"

#include <cctype>
#include <sstream>

namespace cirlab {

std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (std::isspace(c) || std::ispunct(c)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::size_t count_whitespace_tokens(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::size_t n = 0;
  for (std::string word; in >> word;) ++n;
  return n;
}

std::string truncate_whitespace_tokens(std::string_view text, std::size_t max_tokens) {
  std::istringstream in{std::string(text)};
  std::string out;
  std::size_t n = 0;
  for (std::string word; n < max_tokens && in >> word; ++n) {
    if (!out.empty()) out.push_back(' ');
    out += word;
  }
  return out;
}

std::string trim(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  return std::string(text.substr(begin, end - begin));
}

std::string to_lower(std::string_view text) {
  std::string out(text);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace cirlab
