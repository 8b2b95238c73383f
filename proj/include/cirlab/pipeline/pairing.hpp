#pragma once

#include "cirlab/pipeline/records.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace cirlab::data {

struct PairingOptions {
  int k = 20;
  /// Pairs below this cosine similarity are kept but flagged.
  double similarity_floor = 0.3;
  std::uint64_t seed = 0;
  /// Image ids reserved for validation/test; never used on either side of a pair.
  std::set<std::string> holdout;
};

/// For every record with an embedding: rank the other images of the same source and
/// category (different item group, not held out) by cosine similarity, descending with ties
/// by ascending id, keep the top k and pick one uniformly with the per-reference stream
/// substream(seed, "pairing:" + id). Output follows record order. References with no
/// candidate are skipped with a log entry. Embeddings must be unit length.
std::vector<CandidatePair> pair_images(const std::vector<ImageRecord>& records,
                                       const std::map<std::string, Eigen::VectorXd>& embeddings,
                                       const PairingOptions& options);

/// Ranked top-k candidate ids for one reference, exactly as pair_images sees them.
std::vector<std::pair<std::string, double>> ranked_candidates(const ImageRecord& reference,
                                                              const std::vector<ImageRecord>& records,
                                                              const std::map<std::string, Eigen::VectorXd>& embeddings,
                                                              const PairingOptions& options);

/// Throws DataError describing the first pair that breaks a CandidatePair invariant.
void check_pair_invariants(const std::vector<CandidatePair>& pairs, const std::vector<ImageRecord>& records, int k);

}  // namespace cirlab::data
