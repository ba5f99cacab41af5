#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sessionrec/data.hpp"
#include "sessionrec/embedding.hpp"
#include "sessionrec/sequence_encoder.hpp"
#include "sessionrec/session_encoder.hpp"

namespace sessionrec {

Catalog make_catalog(const ProcessedDataset& data);
std::vector<FeatureSpec> feature_specs(const FeatureSchema& schema);

// The most recent `max_sessions` sessions of a history.
std::span<const Session> history_window(const SessionizedSequence& seq, std::size_t max_sessions);

// Embedding, session encoder and sequence encoder sharing one parameter set.
template <typename T>
class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t seed);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return cfg_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }
  const ItemEmbedding<T>& embedding() const { return embedding_; }
  const SessionEncoder<T>& session_encoder() const { return ise_; }
  const SequenceEncoder<T>& sequence_encoder() const { return sse_; }

  // One token per session, in the given order. Every interaction of a
  // session (positive or not) enters with its own side features.
  Var session_tokens(Graph<T>& g, std::span<const Session* const> sessions,
                     const ForwardContext& ctx) const;
  // Per-position interest vectors for a chronological run of sessions.
  Var encode_history(Graph<T>& g, std::span<const Session> sessions,
                     const ForwardContext& ctx) const;
  // Item-level path: item vectors go straight into the sequence encoder.
  Var encode_items_directly(Graph<T>& g, std::span<const std::size_t> ids,
                            std::span<const std::uint32_t> features,
                            const ForwardContext& ctx) const;

  // Inference-time user vector (1×d) over the last max_positions sessions.
  Tensor<T> user_vector(const SessionizedSequence& history) const;
  Tensor<T> item_vectors(const Catalog& catalog) const {
    return embedding_.output_item_vectors(catalog);
  }

 private:
  ModelConfig cfg_;
  ParameterSet<T> params_;
  std::mt19937_64 init_rng_;
  ItemEmbedding<T> embedding_;
  SessionEncoder<T> ise_;
  SequenceEncoder<T> sse_;
};

extern template class Model<float>;
extern template class Model<double>;

}  // namespace sessionrec
