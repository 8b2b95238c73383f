#include "cirlab/training/losses.hpp"

#include "cirlab/error.hpp"
#include "cirlab/model/matching.hpp"

#include <cmath>

namespace cirlab::training {

namespace {

void check_scores(const ad::Matrix& scores, double temperature) {
  if (scores.rows() != scores.cols()) throw ContractViolation("contrastive_loss: score matrix must be square");
  if (scores.rows() < 2) throw ContractViolation("contrastive_loss: needs n >= 2 (at least one negative per row)");
  if (!scores.allFinite()) throw ContractViolation("contrastive_loss: score matrix has non-finite entries");
  if (!(temperature > 0.0)) throw ContractViolation("contrastive_loss: temperature must be positive");
}

// Row-wise softmax of scores / temperature, max-subtracted, and the mean negative
// log-likelihood of the diagonal.
double softmax_and_loss(const ad::Matrix& scores, double temperature, ad::Matrix* probabilities) {
  const ad::Index n = scores.rows();
  double total = 0.0;
  for (ad::Index i = 0; i < n; ++i) {
    const Eigen::RowVectorXd z = scores.row(i) / temperature;
    const double m = z.maxCoeff();
    const Eigen::RowVectorXd e = (z.array() - m).exp();
    const double denom = e.sum();
    total += (m + std::log(denom)) - z(i);
    if (probabilities != nullptr) probabilities->row(i) = e / denom;
  }
  return total / static_cast<double>(n);
}

}  // namespace

double contrastive_loss(const ad::Matrix& scores, double temperature) {
  check_scores(scores, temperature);
  return softmax_and_loss(scores, temperature, nullptr);
}

ad::Var contrastive_loss(const ad::Var& scores, double temperature) {
  check_scores(scores.value(), temperature);
  const ad::Index n = scores.rows();
  ad::Matrix p(n, n);
  const double loss = softmax_and_loss(scores.value(), temperature, &p);
  return ad::make_result(ad::Matrix::Constant(1, 1, loss), {scores}, [p, n, temperature](ad::Node& self) {
    ad::Matrix g = p;
    g.diagonal().array() -= 1.0;
    self.inputs[0]->accumulate(g * (self.grad(0, 0) / (static_cast<double>(n) * temperature)));
  });
}

ad::Var score_matrix(std::span<const ad::Var> queries, std::span<const ad::Var> targets) {
  std::vector<ad::Var> entries;
  entries.reserve(queries.size() * targets.size());
  for (const auto& q : queries)
    for (const auto& t : targets) entries.push_back(model::multi_head_similarity(q, t));
  return ad::stack_scalars(entries, static_cast<ad::Index>(queries.size()), static_cast<ad::Index>(targets.size()));
}

void TripletBatch::validate() const {
  const std::size_t n = reference_images.size();
  if (n < 2) throw ContractViolation("triplet batch needs at least 2 triplets");
  if (modification_texts.size() != n || target_images.size() != n)
    throw ContractViolation("triplet batch lists differ in length");
  if (target_captions && target_captions->size() != n) throw ContractViolation("triplet batch caption list length differs");
}

BatchLosses batch_losses(const TripletBatch& batch, const model::CirModel& model, bool with_ctr, double temperature) {
  batch.validate();
  if (with_ctr && !batch.target_captions) {
    throw ConfigError(
        "caption retrieval needs image-caption pairs; this dataset has no target captions (Fashion IQ style data "
        "does not contain image-caption pairs)");
  }
  const std::size_t n = batch.size();
  std::vector<ad::Var> queries;
  std::vector<ad::Var> targets;
  queries.reserve(n);
  targets.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    queries.push_back(model.query_embedding(*batch.reference_images[i], batch.modification_texts[i]));
    targets.push_back(model.candidate_embedding(*batch.target_images[i]));
  }
  BatchLosses out;
  out.cir = contrastive_loss(score_matrix(queries, targets), temperature);
  if (with_ctr) {
    std::vector<ad::Var> captions;
    captions.reserve(n);
    for (const auto& caption : *batch.target_captions) captions.push_back(model.caption_embedding(caption));
    out.ctr = contrastive_loss(score_matrix(queries, captions), temperature);
  }
  return out;
}

ad::Var cir_loss(const TripletBatch& batch, const model::CirModel& model, double temperature) {
  return batch_losses(batch, model, false, temperature).cir;
}

ad::Var ctr_loss(const TripletBatch& batch, const model::CirModel& model, double temperature) {
  return batch_losses(batch, model, true, temperature).ctr;
}

}  // namespace cirlab::training
