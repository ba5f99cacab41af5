#pragma once

#include <vector>

#include "sessionrec/config.hpp"
#include "sessionrec/layers.hpp"

namespace sessionrec {

// Causal encoder over session tokens: row i of the output depends on
// tokens 0..i only.
template <typename T>
class SequenceEncoder {
 public:
  SequenceEncoder(const SseConfig& cfg, std::size_t d, ParameterSet<T>& params,
                  std::mt19937_64& rng);

  // tokens: m×d with 1 <= m <= max_positions.
  Var encode_sequence(Graph<T>& g, Var tokens, const ForwardContext& ctx) const;
  // Last row of encode_sequence.
  Var user_vector(Graph<T>& g, Var tokens, const ForwardContext& ctx) const;

  const SseConfig& config() const { return cfg_; }

 private:
  SseConfig cfg_;
  std::size_t d_;
  Parameter<T>* positions_ = nullptr;
  std::vector<AttentionBlock<T>> blocks_;
  LayerNorm<T> final_norm_;
  std::vector<GruLayer<T>> recurrent_;
};

extern template class SequenceEncoder<float>;
extern template class SequenceEncoder<double>;

}  // namespace sessionrec
