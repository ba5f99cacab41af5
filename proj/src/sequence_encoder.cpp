#include "sessionrec/sequence_encoder.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sessionrec {

template <typename T>
SequenceEncoder<T>::SequenceEncoder(const SseConfig& cfg, std::size_t d, ParameterSet<T>& params,
                                    std::mt19937_64& rng)
    : cfg_(cfg), d_(d) {
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0) {
    throw std::invalid_argument("sse: dropout must lie in [0, 1)");
  }
  if (cfg.max_positions == 0) throw std::invalid_argument("sse: max_positions must be positive");
  if (cfg.layers == 0) throw std::invalid_argument("sse: layers must be positive");
  if (cfg.backbone == SseBackbone::causal_attention) {
    positions_ = &params.add("sse.position", cfg.max_positions, d);
    init_normal(*positions_, rng);
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      blocks_.emplace_back(params, "sse.block" + std::to_string(l), d, cfg.heads, rng);
    }
    final_norm_ = LayerNorm<T>(params, "sse.ln_final", d);
  } else {
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      recurrent_.emplace_back(params, "sse.gru" + std::to_string(l), d, d, rng);
    }
  }
}

template <typename T>
Var SequenceEncoder<T>::encode_sequence(Graph<T>& g, Var tokens, const ForwardContext& ctx) const {
  const std::size_t m = g.value(tokens).rows();
  if (m == 0) throw std::invalid_argument("encode_sequence: empty session sequence");
  if (m > cfg_.max_positions) {
    throw std::invalid_argument("encode_sequence: " + std::to_string(m) +
                                " sessions exceed max_positions " +
                                std::to_string(cfg_.max_positions) +
                                "; truncate older sessions before encoding");
  }
  if (g.value(tokens).cols() != d_) {
    throw ShapeError("encode_sequence: token width " + std::to_string(g.value(tokens).cols()) +
                     " != " + std::to_string(d_));
  }
  if (cfg_.backbone == SseBackbone::causal_attention) {
    std::vector<std::size_t> pos(m);
    std::iota(pos.begin(), pos.end(), 0);
    // Tokens enter at sqrt(d) times their embedding scale, as is usual for
    // attention recommenders; without it the position table drowns them out.
    const Var scaled = g.scale(tokens, std::sqrt(static_cast<T>(d_)));
    Var x = g.add(scaled, g.gather_rows(g.param(*positions_), pos));
    x = apply_dropout(g, x, cfg_.dropout, ctx);
    for (const auto& block : blocks_) x = block(g, x, AttentionMask::causal, cfg_.dropout, ctx);
    return final_norm_(g, x);
  }
  Var x = tokens;
  for (std::size_t l = 0; l < recurrent_.size(); ++l) {
    if (l > 0) x = apply_dropout(g, x, cfg_.dropout, ctx);
    x = recurrent_[l](g, x);
  }
  return x;
}

template <typename T>
Var SequenceEncoder<T>::user_vector(Graph<T>& g, Var tokens, const ForwardContext& ctx) const {
  const Var out = encode_sequence(g, tokens, ctx);
  const std::size_t last = g.value(out).rows() - 1;
  return last == 0 ? out : g.gather_rows(out, std::span(&last, 1));
}

template class SequenceEncoder<float>;
template class SequenceEncoder<double>;

}  // namespace sessionrec
