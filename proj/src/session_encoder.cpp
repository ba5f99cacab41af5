#include "sessionrec/session_encoder.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace sessionrec {

void check_session_offsets(std::span<const std::size_t> offsets, std::size_t rows) {
  if (offsets.size() < 2) throw std::invalid_argument("session offsets: no sessions");
  if (offsets.front() != 0 || offsets.back() != rows) {
    throw std::invalid_argument("session offsets must span rows 0.." + std::to_string(rows));
  }
  for (std::size_t j = 0; j + 1 < offsets.size(); ++j) {
    if (offsets[j + 1] <= offsets[j]) {
      throw std::invalid_argument("session " + std::to_string(j) + " is empty");
    }
  }
}

template <typename T>
SessionEncoder<T>::SessionEncoder(const IseConfig& cfg, std::size_t d, ParameterSet<T>& params,
                                  std::mt19937_64& rng)
    : cfg_(cfg) {
  const std::size_t layers = std::max<std::size_t>(cfg.layers, 1);
  if (cfg.kind == IseKind::recurrent) {
    for (std::size_t l = 0; l < layers; ++l) {
      recurrent_.emplace_back(params, "ise.gru" + std::to_string(l), d, d, rng);
    }
  } else if (cfg.kind == IseKind::attention) {
    for (std::size_t l = 0; l < layers; ++l) {
      blocks_.emplace_back(params, "ise.block" + std::to_string(l), d, cfg.heads, rng);
    }
  }
}

template <typename T>
Var SessionEncoder<T>::encode_sessions(Graph<T>& g, Var item_vecs,
                                       std::span<const std::size_t> offsets,
                                       const ForwardContext& ctx) const {
  const std::size_t n = g.value(item_vecs).rows();
  check_session_offsets(offsets, n);
  const std::size_t m = offsets.size() - 1;

  if (cfg_.kind == IseKind::mean || cfg_.kind == IseKind::max || cfg_.kind == IseKind::max_relu) {
    std::vector<std::size_t> ids(n);
    for (std::size_t j = 0; j < m; ++j) {
      std::fill(ids.begin() + offsets[j], ids.begin() + offsets[j + 1], j);
    }
    if (cfg_.kind == IseKind::mean) return g.segment_reduce(item_vecs, ids, Reduce::mean);
    const Var x = cfg_.kind == IseKind::max_relu ? g.relu(item_vecs) : item_vecs;
    return g.segment_reduce(x, ids, Reduce::max);
  }

  // Sequential aggregators run independently inside each session.
  std::vector<Var> tokens;
  tokens.reserve(m);
  std::vector<std::size_t> rows;
  for (std::size_t j = 0; j < m; ++j) {
    rows.resize(offsets[j + 1] - offsets[j]);
    std::iota(rows.begin(), rows.end(), offsets[j]);
    Var x = m == 1 ? item_vecs : g.gather_rows(item_vecs, rows);
    if (cfg_.kind == IseKind::recurrent) {
      for (const auto& layer : recurrent_) x = layer(g, x);
      const std::size_t last = rows.size() - 1;
      tokens.push_back(rows.size() == 1 ? x : g.gather_rows(x, std::span(&last, 1)));
    } else {
      for (const auto& block : blocks_) x = block(g, x, AttentionMask::none, 0.0, ctx);
      const std::vector<std::size_t> one(rows.size(), 0);
      tokens.push_back(g.segment_reduce(x, one, Reduce::mean));
    }
  }
  return m == 1 ? tokens.front() : g.concat_rows(tokens);
}

template class SessionEncoder<float>;
template class SessionEncoder<double>;

}  // namespace sessionrec
