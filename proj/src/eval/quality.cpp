#include "cirlab/eval/quality.hpp"

#include "cirlab/error.hpp"
#include "cirlab/seed.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <map>

namespace cirlab::eval {

Json QualitySheet::to_json() const {
  Json j{{"triplet_id", triplet_id},
         {"annotator_id", annotator_id},
         {"category", category},
         {"reference_id", reference_id},
         {"target_id", target_id},
         {"modification_text", modification_text}};
  for (std::size_t c = 0; c < kQualityCriteria.size(); ++c)
    j[kQualityCriteria[c]] = scores[c] ? Json(*scores[c]) : Json(nullptr);
  return j;
}

QualitySheet QualitySheet::from_json(const Json& j) {
  QualitySheet s;
  s.triplet_id = j.at("triplet_id").get<std::string>();
  const std::string who = "sheet " + s.triplet_id;
  s.annotator_id = j.value("annotator_id", std::string());
  s.category = j.value("category", std::string());
  s.reference_id = j.value("reference_id", std::string());
  s.target_id = j.value("target_id", std::string());
  s.modification_text = j.value("modification_text", std::string());
  for (std::size_t c = 0; c < kQualityCriteria.size(); ++c) {
    const char* key = kQualityCriteria[c];
    if (!j.contains(key) || j[key].is_null()) continue;
    const Json& v = j[key];
    if (!v.is_number()) throw DataError(who + ": " + key + " is not a number");
    const double x = v.get<double>();
    if (x != std::floor(x)) throw DataError(who + ": " + key + " must be an integer, got " + v.dump());
    s.scores[c] = static_cast<int>(x);
  }
  return s;
}

std::vector<std::pair<std::string, std::size_t>> stratified_quotas(const std::vector<data::CirTriplet>& triplets,
                                                                   std::size_t n) {
  std::map<std::string, std::size_t> counts;
  for (const auto& t : triplets) ++counts[t.category];
  const std::size_t total = triplets.size();
  n = std::min(n, total);
  struct Share {
    std::string category;
    std::size_t quota;
    std::size_t remainder;  // numerator of the fractional part, over `total`
  };
  std::vector<Share> shares;
  std::size_t assigned = 0;
  for (const auto& [category, count] : counts) {
    const std::size_t exact_num = n * count;
    shares.push_back({category, exact_num / total, exact_num % total});
    assigned += exact_num / total;
  }
  std::vector<std::size_t> order(shares.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return shares[a].remainder > shares[b].remainder; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++shares[order[i % order.size()]].quota;
  std::vector<std::pair<std::string, std::size_t>> out;
  for (const auto& s : shares) out.emplace_back(s.category, s.quota);
  return out;
}

std::vector<QualitySheet> sample_quality(const std::vector<data::CirTriplet>& triplets, std::size_t n,
                                         std::uint64_t seed, const std::string& annotator_id) {
  if (triplets.size() < n)
    spdlog::warn("quality sample: dataset has {} triplets, fewer than the requested {}; sampling all", triplets.size(), n);
  auto rng = substream(seed, "sampling:quality");
  std::vector<const data::CirTriplet*> chosen;
  for (const auto& [category, quota] : stratified_quotas(triplets, n)) {
    std::vector<const data::CirTriplet*> members;
    for (const auto& t : triplets)
      if (t.category == category) members.push_back(&t);
    std::shuffle(members.begin(), members.end(), rng);
    chosen.insert(chosen.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(quota));
  }
  std::sort(chosen.begin(), chosen.end(), [](const auto* a, const auto* b) { return a->id < b->id; });
  std::vector<QualitySheet> sheets;
  for (const auto* t : chosen) {
    QualitySheet s;
    s.triplet_id = t->id;
    s.annotator_id = annotator_id;
    s.category = t->category;
    s.reference_id = t->reference_id;
    s.target_id = t->target_id;
    s.modification_text = t->modification_text;
    sheets.push_back(std::move(s));
  }
  return sheets;
}

QualitySummary aggregate_quality(const std::vector<QualitySheet>& sheets) {
  if (sheets.empty()) throw DataError("no quality sheets to aggregate");
  std::array<std::vector<int>, 3> values;
  for (const auto& s : sheets) {
    for (std::size_t c = 0; c < kQualityCriteria.size(); ++c) {
      const std::string who = "sheet " + s.triplet_id + (s.annotator_id.empty() ? "" : " (" + s.annotator_id + ")");
      if (!s.scores[c]) throw DataError(who + ": missing " + kQualityCriteria[c] + " score");
      const int v = *s.scores[c];
      if (v < 1 || v > 5) throw DataError(who + ": " + kQualityCriteria[c] + " score " + std::to_string(v) + " outside 1-5");
      values[c].push_back(v);
    }
  }
  QualitySummary summary;
  for (std::size_t c = 0; c < values.size(); ++c) {
    const double n = static_cast<double>(values[c].size());
    double sum = 0.0;
    for (int v : values[c]) sum += v;
    const double mean = sum / n;
    double sq = 0.0;
    for (int v : values[c]) sq += (v - mean) * (v - mean);
    summary.criteria[c] = {mean, std::sqrt(sq / n), values[c].size()};
  }
  return summary;
}

std::string format_mean_std(const CriterionStats& stats) {
  // +0.0 folds a rounded negative zero into "0.00".
  return fmt::format("{:.2f} ± {:.2f}", stats.mean + 0.0, stats.stddev + 0.0);
}

std::string format_quality_table(const std::vector<std::pair<std::string, QualitySummary>>& rows) {
  std::size_t label_width = 7;
  for (const auto& [label, _] : rows) label_width = std::max(label_width, label.size());
  std::string out = fmt::format("{:<{}}  {:>13}  {:>13}  {:>13}\n", "Dataset", label_width, "Faithfulness", "Details",
                                "Saliency");
  for (const auto& [label, summary] : rows) {
    out += fmt::format("{:<{}}", label, label_width);
    for (const auto& c : summary.criteria) {
      const std::string cell = format_mean_std(c);
      // "±" is two bytes in UTF-8; pad by display width.
      out += std::string(2 + 13 - (cell.size() - 1), ' ') + cell;
    }
    out += "\n";
  }
  out += "# mean ± population standard deviation over all (triplet, annotator) scores\n";
  return out;
}

void write_quality_sheets(const std::filesystem::path& path, const std::vector<QualitySheet>& sheets) {
  std::vector<Json> lines;
  lines.reserve(sheets.size());
  for (const auto& s : sheets) lines.push_back(s.to_json());
  write_jsonl(path, lines);
}

std::vector<QualitySheet> read_quality_sheets(const std::filesystem::path& path) {
  std::vector<QualitySheet> out;
  std::size_t line = 0;
  for (const auto& j : read_jsonl(path)) {
    ++line;
    try {
      out.push_back(QualitySheet::from_json(j));
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(line) + ": " + e.what());
    } catch (const Json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line) + ": malformed sheet: " + e.what());
    }
  }
  return out;
}

}  // namespace cirlab::eval
