#include "sessionrec/objective.hpp"

#include <stdexcept>

namespace sessionrec {

std::size_t TrainingTargets::num_positives() const {
  std::size_t n = 0;
  for (const auto& p : positions) n += p.positives.size();
  return n;
}

void append_targets(TrainingTargets& out, std::span<const Session> sessions,
                    std::size_t row_offset) {
  for (std::size_t i = 0; i + 1 < sessions.size(); ++i) {
    const Session& next = sessions[i + 1];
    PositionTargets p;
    p.row = row_offset + i;
    p.positives = next.positives();
    p.session_negatives = next.negatives();
    if (p.positives.empty()) {
      throw DataError("target session " + next.session_id + " has no positive item");
    }
    out.positions.push_back(std::move(p));
  }
}

TrainingTargets build_targets(std::span<const Session> sessions) {
  TrainingTargets t;
  append_targets(t, sessions);
  return t;
}

std::vector<std::size_t> sample_negatives(std::size_t catalog_size, std::size_t count,
                                          std::mt19937_64& rng) {
  if (catalog_size == 0) throw std::invalid_argument("sample_negatives: empty catalog");
  std::uniform_int_distribution<std::size_t> dist(0, catalog_size - 1);
  std::vector<std::size_t> out(count);
  for (auto& v : out) v = dist(rng);
  return out;
}

void draw_sampled_negatives(TrainingTargets& targets, std::size_t catalog_size,
                            std::size_t count, std::mt19937_64& rng) {
  for (auto& p : targets.positions) p.sampled_negatives = sample_negatives(catalog_size, count, rng);
}

CandidateIndex::CandidateIndex(const TrainingTargets& targets) {
  for (const auto& p : targets.positions) {
    for (auto v : p.positives) add(v);
    for (auto v : p.session_negatives) add(v);
    for (auto v : p.sampled_negatives) add(v);
  }
}

std::size_t CandidateIndex::add(std::size_t item) {
  const auto [it, inserted] = slots_.try_emplace(item, items_.size());
  if (inserted) items_.push_back(item);
  return it->second;
}

std::size_t CandidateIndex::slot(std::size_t item) const {
  const auto it = slots_.find(item);
  if (it == slots_.end()) {
    throw std::out_of_range("candidate index: item " + std::to_string(item) + " not indexed");
  }
  return it->second;
}

template <typename T>
Tensor<T> score(const Tensor<T>& user_vecs, const Tensor<T>& item_vecs) {
  Graph<T> g(false);
  return g.value(score(g, g.constant(user_vecs), g.constant(item_vecs)));
}

template <typename T>
Var score(Graph<T>& g, Var user_vecs, Var item_vecs) {
  return g.matmul(user_vecs, item_vecs, false, true);
}

namespace {

// Lays out one softmax group per (position, positive): the positive's logit
// first, then the negatives chosen by `negatives_of`.
template <typename T, typename Negatives>
Var grouped_xent(Graph<T>& g, Var scores, const CandidateIndex& index,
                 const TrainingTargets& targets, Negatives negatives_of, bool skip_empty) {
  const std::size_t cols = g.value(scores).cols();
  std::vector<std::size_t> flat;
  std::vector<XentGroup> groups;
  for (const auto& p : targets.positions) {
    const std::vector<std::size_t>& negs = negatives_of(p);
    if (negs.empty() && skip_empty) continue;
    if (p.positives.empty()) {
      throw std::invalid_argument("loss: position " + std::to_string(p.row) +
                                  " has no positive items");
    }
    const std::size_t base = p.row * cols;
    for (std::size_t pos : p.positives) {
      XentGroup grp;
      grp.begin = flat.size();
      grp.target = flat.size();
      flat.push_back(base + index.slot(pos));
      for (std::size_t neg : negs) flat.push_back(base + index.slot(neg));
      grp.end = flat.size();
      groups.push_back(grp);
    }
  }
  if (groups.empty()) return g.constant(Tensor<T>(1, 1));
  const Var logits = g.gather_elements(scores, flat, 1, flat.size());
  return g.softmax_xent(logits, groups);
}

}  // namespace

template <typename T>
Var retrieval_loss(Graph<T>& g, Var scores, const CandidateIndex& index,
                   const TrainingTargets& targets) {
  return grouped_xent<T>(
      g, scores, index, targets,
      [](const PositionTargets& p) -> const std::vector<std::size_t>& {
        if (p.sampled_negatives.empty()) {
          throw std::invalid_argument("retrieval_loss: no sampled negatives drawn");
        }
        return p.sampled_negatives;
      },
      false);
}

template <typename T>
Var rank_loss(Graph<T>& g, Var scores, const CandidateIndex& index,
              const TrainingTargets& targets) {
  return grouped_xent<T>(
      g, scores, index, targets,
      [](const PositionTargets& p) -> const std::vector<std::size_t>& {
        return p.session_negatives;
      },
      true);
}

template <typename T>
LossTerms<T> total_loss(Graph<T>& g, Var scores, const CandidateIndex& index,
                        const TrainingTargets& targets, const LossConfig& cfg) {
  if (cfg.alpha < 0.0) throw std::invalid_argument("total_loss: alpha must be >= 0");
  LossTerms<T> out;
  out.num_positives = targets.num_positives();
  out.retrieval = retrieval_loss(g, scores, index, targets);
  if (cfg.alpha == 0.0) {
    out.rank = g.constant(Tensor<T>(1, 1));
    out.total = out.retrieval;
  } else {
    out.rank = rank_loss(g, scores, index, targets);
    out.total = g.add(out.retrieval, g.scale(out.rank, static_cast<T>(cfg.alpha)));
  }
  return out;
}

template <typename T>
LossTerms<T> compute_loss(Graph<T>& g, const ItemEmbedding<T>& embedding, const Catalog& catalog,
                          Var outputs, const TrainingTargets& targets, const LossConfig& cfg) {
  const CandidateIndex index(targets);
  const auto features = catalog.gather_features(index.items());
  const Var items = embedding.embed_items(g, index.items(), features);
  return total_loss(g, score(g, outputs, items), index, targets, cfg);
}

#define SESSIONREC_INSTANTIATE(T)                                                              \
  template Tensor<T> score(const Tensor<T>&, const Tensor<T>&);                                \
  template Var score(Graph<T>&, Var, Var);                                                     \
  template Var retrieval_loss(Graph<T>&, Var, const CandidateIndex&, const TrainingTargets&);  \
  template Var rank_loss(Graph<T>&, Var, const CandidateIndex&, const TrainingTargets&);       \
  template LossTerms<T> total_loss(Graph<T>&, Var, const CandidateIndex&,                      \
                                   const TrainingTargets&, const LossConfig&);                 \
  template LossTerms<T> compute_loss(Graph<T>&, const ItemEmbedding<T>&, const Catalog&, Var,  \
                                     const TrainingTargets&, const LossConfig&);
SESSIONREC_INSTANTIATE(float)
SESSIONREC_INSTANTIATE(double)
#undef SESSIONREC_INSTANTIATE

}  // namespace sessionrec
