#pragma once

#include "cirlab/jsonl.hpp"
#include "cirlab/pipeline/records.hpp"

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace cirlab::data {

/// Counts in the layout of a dataset-statistics table: one row for the triplets, one
/// for the image-caption pairs they carry. Words come from tokenize_words.
struct DatasetStats {
  std::size_t triplets = 0;
  std::size_t unique_images = 0;
  std::size_t vocab_size = 0;
  double avg_modification_length = 0.0;

  std::size_t caption_pairs = 0;  ///< unique (image, caption) pairs
  std::size_t caption_vocab_size = 0;
  double avg_caption_length = 0.0;

  std::size_t excluded_no_change = 0;
  std::size_t excluded_incomplete = 0;  ///< a caption or modification is missing
  std::size_t below_similarity_floor = 0;

  Json to_json() const;
  /// #Uniq imgs | Ann. type | Pair type | #Pairs | Vocab size | Avg. length
  std::string to_table() const;
};

/// Statistics over a finished triplet list. Exclusion counters are left at zero.
DatasetStats compute_stats(const std::vector<CirTriplet>& triplets);

struct BuildResult {
  std::vector<CirTriplet> triplets;
  DatasetStats stats;
};

/// Joins pairs with their captions and modification texts. Pairs whose annotation failed
/// or whose texts report no visible difference are excluded and counted. Triplets follow
/// pair order and are numbered from `id_prefix`. Any id not in `images` is a DataError
/// listing every offending pair; so is any id in `holdout`.
BuildResult build_dataset(const std::vector<ImageRecord>& images, const std::vector<CandidatePair>& pairs,
                          const std::map<std::string, CaptionRecord>& captions,
                          const std::vector<ModificationRecord>& modifications, const std::string& id_prefix = "t",
                          const std::set<std::string>& holdout = {});

/// images.jsonl, triplets.jsonl, stats.json, stats.txt
void write_dataset(const std::filesystem::path& dir, const std::vector<ImageRecord>& images,
                   const BuildResult& result);

}  // namespace cirlab::data
