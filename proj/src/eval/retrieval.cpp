#include "cirlab/eval/retrieval.hpp"

#include "cirlab/archive.hpp"
#include "cirlab/error.hpp"
#include "cirlab/model/matching.hpp"
#include "cirlab/parallel.hpp"

#include <algorithm>
#include <set>

namespace cirlab::eval {

void RetrievalIndex::save(const std::filesystem::path& path) const {
  Archive archive;
  archive.metadata["format"] = "cirlab-index";
  archive.metadata["model_fingerprint"] = model_fingerprint;
  archive.metadata["candidate_ids"] = candidate_ids;
  for (std::size_t i = 0; i < size(); ++i) archive.tensors.push_back({candidate_ids[i], embeddings[i]});
  write_archive(path, archive);
}

RetrievalIndex RetrievalIndex::load(const std::filesystem::path& path) {
  const Archive archive = read_archive(path);
  if (archive.metadata.value("format", "") != "cirlab-index") throw DataError(path.string() + " is not a retrieval index");
  RetrievalIndex index;
  index.model_fingerprint = archive.metadata.at("model_fingerprint").get<std::string>();
  index.candidate_ids = archive.metadata.at("candidate_ids").get<std::vector<std::string>>();
  for (const auto& id : index.candidate_ids) index.embeddings.push_back(archive.at(id));
  return index;
}

RetrievalIndex build_index(std::span<const IndexedImage> candidates, const model::CirModel& model,
                           std::size_t workers) {
  return build_index(candidates, model, model.fingerprint(), workers);
}

RetrievalIndex build_index(std::span<const IndexedImage> candidates, const model::CirModel& model,
                           const std::string& model_fingerprint, std::size_t workers) {
  std::set<std::string> seen;
  for (const auto& c : candidates) {
    if (c.image == nullptr) throw ContractViolation("build_index: candidate '" + c.id + "' has no image");
    if (!seen.insert(c.id).second) throw ContractViolation("build_index: duplicate candidate id '" + c.id + "'");
  }
  RetrievalIndex index;
  index.model_fingerprint = model_fingerprint;
  index.embeddings.resize(candidates.size());
  parallel_for(candidates.size(), workers, [&](std::size_t i) {
    ad::NoGradGuard no_grad;
    index.embeddings[i] = model.candidate_embedding(*candidates[i].image).value();
  });
  for (const auto& c : candidates) index.candidate_ids.push_back(c.id);
  return index;
}

bool ranks_before(const ScoredId& a, const ScoredId& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

std::vector<ScoredId> retrieve(const ad::Matrix& query_embedding, const RetrievalIndex& index, std::size_t k) {
  if (k > index.size())
    throw ContractViolation("retrieve: k=" + std::to_string(k) + " exceeds index size " + std::to_string(index.size()));
  std::vector<ScoredId> scored(index.size());
  for (std::size_t i = 0; i < index.size(); ++i)
    scored[i] = {index.candidate_ids[i], model::multi_head_similarity(query_embedding, index.embeddings[i])};
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(), ranks_before);
  scored.resize(k);
  return scored;
}

void require_same_model(const RetrievalIndex& index, const std::string& model_fingerprint) {
  if (index.model_fingerprint != model_fingerprint)
    throw DataError("retrieval index was built with model " + index.model_fingerprint.substr(0, 12) +
                    ", queried with " + model_fingerprint.substr(0, 12));
}

std::vector<ScoredId> retrieve(const Image& reference_image, std::string_view modification_text,
                               const RetrievalIndex& index, std::size_t k, const model::CirModel& model) {
  require_same_model(index, model.fingerprint());
  ad::NoGradGuard no_grad;
  return retrieve(model.query_embedding(reference_image, modification_text).value(), index, k);
}

double recall_at_k(const std::map<std::string, std::vector<std::string>>& results,
                   const std::map<std::string, std::string>& ground_truth, std::size_t k) {
  if (results.empty()) throw ContractViolation("recall_at_k: no queries");
  std::size_t hits = 0;
  for (const auto& [query, ranked] : results) {
    const auto truth = ground_truth.find(query);
    if (truth == ground_truth.end()) throw DataError("recall_at_k: query '" + query + "' has no ground-truth target");
    const auto end = ranked.begin() + static_cast<std::ptrdiff_t>(std::min(k, ranked.size()));
    if (std::find(ranked.begin(), end, truth->second) != end) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(results.size());
}

}  // namespace cirlab::eval
