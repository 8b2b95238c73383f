#pragma once

#include "cirlab/autograd.hpp"
#include "cirlab/image.hpp"
#include "cirlab/model/cir_model.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cirlab::training {

/// In-batch contrastive loss over an n x n score matrix whose diagonal holds the positive
/// pairs: -(1/n) sum_i log softmax_i(s_i. / temperature)[i]. Uses max-subtraction.
/// Throws ContractViolation for n < 2, non-square or non-finite input.
double contrastive_loss(const ad::Matrix& scores, double temperature = 1.0);
ad::Var contrastive_loss(const ad::Var& scores, double temperature = 1.0);

/// scores[i][j] = multi_head_similarity(queries[i], targets[j]).
ad::Var score_matrix(std::span<const ad::Var> queries, std::span<const ad::Var> targets);

struct TripletBatch {
  std::vector<const Image*> reference_images;
  std::vector<std::string> modification_texts;
  std::vector<const Image*> target_images;
  std::optional<std::vector<std::string>> target_captions;

  std::size_t size() const { return reference_images.size(); }
  /// n >= 2 and all lists share the same length.
  void validate() const;
};

ad::Var cir_loss(const TripletBatch& batch, const model::CirModel& model, double temperature = 1.0);
/// Throws ConfigError when the batch carries no target captions.
ad::Var ctr_loss(const TripletBatch& batch, const model::CirModel& model, double temperature = 1.0);

struct BatchLosses {
  ad::Var cir;
  ad::Var ctr;  ///< undefined unless requested
};

/// Computes the CIR loss and, when `with_ctr`, the CTR loss, sharing the query pass.
BatchLosses batch_losses(const TripletBatch& batch, const model::CirModel& model, bool with_ctr, double temperature);

}  // namespace cirlab::training
