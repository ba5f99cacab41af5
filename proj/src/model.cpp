#include "sessionrec/model.hpp"

#include <stdexcept>

namespace sessionrec {

Catalog make_catalog(const ProcessedDataset& data) {
  Catalog c;
  c.size = data.catalog_size;
  c.feature_width = data.schema.width();
  c.features = data.catalog_features;
  if (c.features.size() != c.size * c.feature_width) {
    throw DataError("catalog features do not cover every item");
  }
  return c;
}

std::vector<FeatureSpec> feature_specs(const FeatureSchema& schema) {
  std::vector<FeatureSpec> out;
  for (const auto& col : schema.columns) out.push_back({col.name, col.cardinality()});
  return out;
}

std::span<const Session> history_window(const SessionizedSequence& seq, std::size_t max_sessions) {
  std::span<const Session> all(seq.sessions);
  if (max_sessions == 0 || all.size() <= max_sessions) return all;
  return all.subspan(all.size() - max_sessions);
}

template <typename T>
Model<T>::Model(const ModelConfig& cfg, std::uint64_t seed)
    : cfg_(cfg),
      init_rng_(seed),
      embedding_(cfg.embedding, params_, init_rng_),
      ise_(cfg.ise, cfg.d(), params_, init_rng_),
      sse_(cfg.sse, cfg.d(), params_, init_rng_) {}

template <typename T>
Var Model<T>::session_tokens(Graph<T>& g, std::span<const Session* const> sessions,
                             const ForwardContext& ctx) const {
  const std::size_t width = cfg_.embedding.features.size();
  std::vector<std::size_t> ids;
  std::vector<std::uint32_t> features;
  std::vector<std::size_t> offsets{0};
  for (const Session* s : sessions) {
    if (s->items.empty()) throw std::invalid_argument("session " + s->session_id + " is empty");
    for (const auto& item : s->items) {
      if (item.side_features.size() != width) {
        throw std::invalid_argument("session " + s->session_id + ": item has " +
                                    std::to_string(item.side_features.size()) +
                                    " side features, model expects " + std::to_string(width));
      }
      ids.push_back(item.item_id);
      features.insert(features.end(), item.side_features.begin(), item.side_features.end());
    }
    offsets.push_back(ids.size());
  }
  const Var items = embedding_.embed_items(g, ids, features);
  return ise_.encode_sessions(g, items, offsets, ctx);
}

template <typename T>
Var Model<T>::encode_history(Graph<T>& g, std::span<const Session> sessions,
                             const ForwardContext& ctx) const {
  std::vector<const Session*> ptrs;
  ptrs.reserve(sessions.size());
  for (const auto& s : sessions) ptrs.push_back(&s);
  return sse_.encode_sequence(g, session_tokens(g, ptrs, ctx), ctx);
}

template <typename T>
Var Model<T>::encode_items_directly(Graph<T>& g, std::span<const std::size_t> ids,
                                    std::span<const std::uint32_t> features,
                                    const ForwardContext& ctx) const {
  return sse_.encode_sequence(g, embedding_.embed_items(g, ids, features), ctx);
}

template <typename T>
Tensor<T> Model<T>::user_vector(const SessionizedSequence& history) const {
  const auto window = history_window(history, cfg_.sse.max_positions);
  if (window.empty()) throw std::invalid_argument("user_vector: empty history");
  Graph<T> g(false);
  const ForwardContext ctx{};
  std::vector<const Session*> ptrs;
  for (const auto& s : window) ptrs.push_back(&s);
  const Var u = sse_.user_vector(g, session_tokens(g, ptrs, ctx), ctx);
  return g.value(u);
}

template class Model<float>;
template class Model<double>;

}  // namespace sessionrec
