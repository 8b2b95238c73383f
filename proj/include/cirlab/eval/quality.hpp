#pragma once

#include "cirlab/jsonl.hpp"
#include "cirlab/pipeline/records.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cirlab::eval {

inline constexpr std::array<const char*, 3> kQualityCriteria{"faithfulness", "details", "saliency"};

/// One annotator's 1-5 scores for one triplet. Blank sheets carry no scores.
struct QualitySheet {
  std::string triplet_id;
  std::string annotator_id;
  std::string category;
  std::string reference_id;
  std::string target_id;
  std::string modification_text;
  std::array<std::optional<int>, 3> scores;  ///< indexed like kQualityCriteria

  Json to_json() const;
  static QualitySheet from_json(const Json& json);
};

/// Seeded sample of n triplets, stratified across categories by largest remainder so each
/// category's share is within one item of exact proportionality. Returns blank sheets
/// sorted by triplet id. Smaller datasets are sampled whole, with a warning.
std::vector<QualitySheet> sample_quality(const std::vector<data::CirTriplet>& triplets, std::size_t n,
                                         std::uint64_t seed, const std::string& annotator_id = "");

/// Per-category quota used by sample_quality; exposed for checking.
std::vector<std::pair<std::string, std::size_t>> stratified_quotas(const std::vector<data::CirTriplet>& triplets,
                                                                   std::size_t n);

struct CriterionStats {
  double mean = 0.0;
  double stddev = 0.0;  ///< population (divide by N)
  std::size_t count = 0;
};

struct QualitySummary {
  std::array<CriterionStats, 3> criteria;
};

/// Throws DataError naming the sheet when a score is missing, non-integral or out of [1, 5].
QualitySummary aggregate_quality(const std::vector<QualitySheet>& sheets);

/// "m.mm ± s.ss"
std::string format_mean_std(const CriterionStats& stats);

/// Rows of dataset label against Faithfulness / Details / Saliency columns.
std::string format_quality_table(const std::vector<std::pair<std::string, QualitySummary>>& rows);

void write_quality_sheets(const std::filesystem::path& path, const std::vector<QualitySheet>& sheets);
/// Errors name the file, line and triplet.
std::vector<QualitySheet> read_quality_sheets(const std::filesystem::path& path);

}  // namespace cirlab::eval
