#pragma once

#include "cirlab/autograd.hpp"
#include "cirlab/image.hpp"
#include "cirlab/model/cir_model.hpp"

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace cirlab::eval {

/// Mixed candidate embeddings (n_t x d_c each, or 1 x d_q in global-mean mode) tagged
/// with the fingerprint of the model that produced them.
struct RetrievalIndex {
  std::vector<std::string> candidate_ids;
  std::vector<ad::Matrix> embeddings;
  std::string model_fingerprint;

  std::size_t size() const { return candidate_ids.size(); }

  void save(const std::filesystem::path& path) const;
  static RetrievalIndex load(const std::filesystem::path& path);
};

struct IndexedImage {
  std::string id;
  const Image* image = nullptr;
};

/// Encodes and mixes every candidate once. Ids must be unique; any encoding failure aborts.
RetrievalIndex build_index(std::span<const IndexedImage> candidates, const model::CirModel& model,
                           std::size_t workers = 1);
/// Same, with the fingerprint already known (avoids rehashing large models).
RetrievalIndex build_index(std::span<const IndexedImage> candidates, const model::CirModel& model,
                           const std::string& model_fingerprint, std::size_t workers = 1);

struct ScoredId {
  std::string id;
  double score = 0.0;

  bool operator==(const ScoredId&) const = default;
};

/// Strict ranking order: higher score first, then ascending id.
bool ranks_before(const ScoredId& a, const ScoredId& b);

/// Top-k of the index against an already mixed query embedding. k must not exceed the
/// index size.
std::vector<ScoredId> retrieve(const ad::Matrix& query_embedding, const RetrievalIndex& index, std::size_t k);

/// Encodes the query with `model`, which must be the model the index was built with.
std::vector<ScoredId> retrieve(const Image& reference_image, std::string_view modification_text,
                               const RetrievalIndex& index, std::size_t k, const model::CirModel& model);

/// Throws DataError unless the fingerprints agree.
void require_same_model(const RetrievalIndex& index, const std::string& model_fingerprint);

/// 100 * (#queries whose target is among the first k ids) / #queries.
/// Every query in `results` needs a ground-truth entry.
double recall_at_k(const std::map<std::string, std::vector<std::string>>& results,
                   const std::map<std::string, std::string>& ground_truth, std::size_t k);

}  // namespace cirlab::eval
