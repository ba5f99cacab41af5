#pragma once

#include <random>
#include <span>
#include <unordered_map>
#include <vector>

#include "sessionrec/config.hpp"
#include "sessionrec/data.hpp"
#include "sessionrec/embedding.hpp"

namespace sessionrec {

// Supervision for one output row: the items of the following session.
struct PositionTargets {
  std::size_t row = 0;
  std::vector<std::size_t> positives;
  std::vector<std::size_t> session_negatives;
  std::vector<std::size_t> sampled_negatives;
};

struct TrainingTargets {
  std::vector<PositionTargets> positions;
  std::size_t num_positives() const;
};

// Position i (row row_offset + i) predicts session i+1, for i = 0..m-2.
// Throws DataError if a target session has no positive item.
void append_targets(TrainingTargets& out, std::span<const Session> sessions,
                    std::size_t row_offset = 0);
TrainingTargets build_targets(std::span<const Session> sessions);

// Uniform with replacement over [0, catalog_size).
std::vector<std::size_t> sample_negatives(std::size_t catalog_size, std::size_t count,
                                          std::mt19937_64& rng);
void draw_sampled_negatives(TrainingTargets& targets, std::size_t catalog_size,
                            std::size_t count, std::mt19937_64& rng);

// Distinct item ids appearing in a set of targets, in first-seen order.
class CandidateIndex {
 public:
  CandidateIndex() = default;
  explicit CandidateIndex(const TrainingTargets& targets);

  std::size_t add(std::size_t item);
  std::size_t slot(std::size_t item) const;
  const std::vector<std::size_t>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }

 private:
  std::vector<std::size_t> items_;
  std::unordered_map<std::size_t, std::size_t> slots_;
};

// Dot-product scores of each user row against each item row.
template <typename T>
Tensor<T> score(const Tensor<T>& user_vecs, const Tensor<T>& item_vecs);
template <typename T>
Var score(Graph<T>& g, Var user_vecs, Var item_vecs);

// The loss functions read `scores` (rows × candidates) where column
// index.slot(v) holds the logit of item v.
template <typename T>
Var retrieval_loss(Graph<T>& g, Var scores, const CandidateIndex& index,
                   const TrainingTargets& targets);
// Positions whose target session has no negatives contribute 0.
template <typename T>
Var rank_loss(Graph<T>& g, Var scores, const CandidateIndex& index,
              const TrainingTargets& targets);

template <typename T>
struct LossTerms {
  Var total;
  Var retrieval;
  Var rank;
  std::size_t num_positives = 0;
};

template <typename T>
LossTerms<T> total_loss(Graph<T>& g, Var scores, const CandidateIndex& index,
                        const TrainingTargets& targets, const LossConfig& cfg);

// Embeds every candidate through the tied item embedding and scores the
// position outputs against them.
template <typename T>
LossTerms<T> compute_loss(Graph<T>& g, const ItemEmbedding<T>& embedding, const Catalog& catalog,
                          Var outputs, const TrainingTargets& targets, const LossConfig& cfg);

}  // namespace sessionrec
