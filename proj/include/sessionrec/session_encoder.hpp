#pragma once

#include <span>
#include <vector>

#include "sessionrec/config.hpp"
#include "sessionrec/layers.hpp"

namespace sessionrec {

// Rows [offsets[j], offsets[j+1]) of the item matrix form session j.
// Throws std::invalid_argument unless offsets start at 0, end at `rows` and
// strictly increase (every session non-empty).
void check_session_offsets(std::span<const std::size_t> offsets, std::size_t rows);

// Collapses each session's item vectors into one session token.
template <typename T>
class SessionEncoder {
 public:
  SessionEncoder(const IseConfig& cfg, std::size_t d, ParameterSet<T>& params,
                 std::mt19937_64& rng);

  Var encode_sessions(Graph<T>& g, Var item_vecs, std::span<const std::size_t> offsets,
                      const ForwardContext& ctx) const;

  const IseConfig& config() const { return cfg_; }

 private:
  IseConfig cfg_;
  std::vector<GruLayer<T>> recurrent_;
  std::vector<AttentionBlock<T>> blocks_;
};

extern template class SessionEncoder<float>;
extern template class SessionEncoder<double>;

}  // namespace sessionrec
