#pragma once

#include "cirlab/eval/retrieval.hpp"
#include "cirlab/jsonl.hpp"
#include "cirlab/pipeline/records.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cirlab::eval {

/// Which images form a category's candidate pool.
enum class GalleryMode {
  split_images,   ///< every image of the category listed in the split's image manifest
  target_images,  ///< only the unique target images of the category's triplets
  manifest,       ///< images of the category from a separately supplied manifest
};

std::string to_string(GalleryMode mode);
GalleryMode parse_gallery_mode(const std::string& text);

struct EvalOptions {
  /// Categories to report, in report order. Empty means every category in the triplets, sorted.
  std::vector<std::string> categories;
  GalleryMode gallery = GalleryMode::split_images;
  std::filesystem::path gallery_manifest;
  std::size_t qualitative = 0;  ///< queries to dump with their top-3
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::string dataset_tag;
};

struct CategoryRecall {
  std::string category;
  double recall_at_10 = 0.0;
  double recall_at_50 = 0.0;
  std::size_t triplets = 0;
  std::size_t gallery_size = 0;
};

struct QualitativeEntry {
  std::string triplet_id;
  std::string category;
  std::string reference_id;
  std::string modification_text;
  std::string target_id;
  std::size_t target_rank = 0;  ///< 1-based; 0 when the target is not in the gallery
  std::vector<ScoredId> top;
};

struct EvalReport {
  std::string dataset_tag;
  std::string checkpoint_fingerprint;
  std::string gallery_mode;
  std::size_t triplet_count = 0;
  std::vector<CategoryRecall> per_category;
  std::vector<std::string> excluded_categories;
  double average = 0.0;  ///< mean of every per-category R@10 and R@50 value
  std::vector<QualitativeEntry> qualitative;

  Json to_json() const;
  /// Categories side by side with R@10 / R@50 columns, then the average.
  std::string to_table() const;
};

EvalReport evaluate(const std::vector<data::ImageRecord>& images, const std::vector<data::CirTriplet>& triplets,
                    const model::CirModel& model, const EvalOptions& options);

/// Reads `images.jsonl` and `triplets.jsonl` from a dataset directory.
EvalReport evaluate_dir(const std::filesystem::path& dataset_dir, const model::CirModel& model, EvalOptions options);

/// report.json, report.txt and, when present, qualitative.jsonl.
void write_report(const EvalReport& report, const std::filesystem::path& out_dir);

}  // namespace cirlab::eval
