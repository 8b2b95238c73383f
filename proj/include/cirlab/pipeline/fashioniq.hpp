#pragma once

#include "cirlab/pipeline/records.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace cirlab::data {

struct FashionIqSplit {
  std::vector<ImageRecord> images;
  std::vector<CirTriplet> triplets;  ///< no captions: this data has no image-caption pairs
};

/// Reads the public Fashion IQ layout under `root`:
///   captions/cap.<category>.<split>.json        [{candidate, target, captions: [...]}]
///   image_splits/split.<category>.<split>.json  [ids]   (optional)
///   images/<id>.{png,jpg,jpeg}
/// The annotations of a pair are joined with " and ". Images come from the split list
/// when present, otherwise from the ids the triplets use. Missing image files are a DataError.
FashionIqSplit load_fashioniq(const std::filesystem::path& root, const std::vector<std::string>& categories,
                              const std::string& split);

/// " and "-join of the non-empty, trimmed annotations.
std::string join_annotations(const std::vector<std::string>& captions);

}  // namespace cirlab::data
