#include "cirlab/pipeline/pairing.hpp"

#include "cirlab/error.hpp"
#include "cirlab/seed.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <unordered_map>

namespace cirlab::data {

namespace {

bool same_bucket(const ImageRecord& a, const ImageRecord& b) {
  return a.source == b.source && a.category == b.category;
}

}  // namespace

std::vector<std::pair<std::string, double>> ranked_candidates(const ImageRecord& reference,
                                                              const std::vector<ImageRecord>& records,
                                                              const std::map<std::string, Eigen::VectorXd>& embeddings,
                                                              const PairingOptions& options) {
  const auto ref = embeddings.find(reference.id);
  if (ref == embeddings.end()) return {};
  std::vector<std::pair<std::string, double>> scored;
  for (const auto& r : records) {
    if (r.id == reference.id || r.item_group == reference.item_group || !same_bucket(r, reference)) continue;
    if (options.holdout.contains(r.id)) continue;
    const auto it = embeddings.find(r.id);
    if (it == embeddings.end()) continue;
    scored.emplace_back(r.id, std::clamp(ref->second.dot(it->second), -1.0, 1.0));
  }
  const auto k = std::min(scored.size(), static_cast<std::size_t>(std::max(options.k, 0)));
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(),
                    [](const auto& a, const auto& b) { return a.second != b.second ? a.second > b.second : a.first < b.first; });
  scored.resize(k);
  return scored;
}

std::vector<CandidatePair> pair_images(const std::vector<ImageRecord>& records,
                                       const std::map<std::string, Eigen::VectorXd>& embeddings,
                                       const PairingOptions& options) {
  if (options.k < 1) throw ConfigError("k must be at least 1", "pipeline.k");
  std::vector<CandidatePair> pairs;
  std::size_t small_buckets = 0;
  for (const auto& reference : records) {
    if (options.holdout.contains(reference.id)) continue;
    if (!embeddings.contains(reference.id)) {
      spdlog::info("pair: '{}' has no embedding; skipped", reference.id);
      continue;
    }
    const auto top = ranked_candidates(reference, records, embeddings, options);
    if (top.empty()) {
      spdlog::info("pair: '{}' has no eligible candidate in its source/category bucket; skipped", reference.id);
      continue;
    }
    if (top.size() < static_cast<std::size_t>(options.k)) ++small_buckets;
    auto rng = substream(options.seed, "pairing:" + reference.id);
    const std::size_t pick = std::uniform_int_distribution<std::size_t>(0, top.size() - 1)(rng);
    CandidatePair p;
    p.reference_id = reference.id;
    p.target_id = top[pick].first;
    p.similarity = top[pick].second;
    p.rank_of_target = static_cast<int>(pick) + 1;
    p.below_similarity_floor = p.similarity < options.similarity_floor;
    pairs.push_back(std::move(p));
  }
  if (small_buckets > 0)
    spdlog::warn("pair: {} references had fewer than k={} candidates; all available candidates were used", small_buckets,
                 options.k);
  return pairs;
}

void check_pair_invariants(const std::vector<CandidatePair>& pairs, const std::vector<ImageRecord>& records, int k) {
  std::unordered_map<std::string, const ImageRecord*> by_id;
  for (const auto& r : records) by_id.emplace(r.id, &r);
  for (const auto& p : pairs) {
    const std::string who = "pair " + p.reference_id + " -> " + p.target_id + ": ";
    const auto ref = by_id.find(p.reference_id);
    const auto tgt = by_id.find(p.target_id);
    if (ref == by_id.end() || tgt == by_id.end()) throw DataError(who + "unknown image id");
    if (p.reference_id == p.target_id) throw DataError(who + "image paired with itself");
    if (ref->second->item_group == tgt->second->item_group) throw DataError(who + "same item group");
    if (!same_bucket(*ref->second, *tgt->second)) throw DataError(who + "different source or category");
    if (p.similarity < -1.0 || p.similarity > 1.0) throw DataError(who + "similarity outside [-1, 1]");
    if (p.rank_of_target < 1 || p.rank_of_target > k) throw DataError(who + "rank outside [1, k]");
  }
}

}  // namespace cirlab::data
