#include "sessionrec/embedding.hpp"

#include <cmath>
#include <stdexcept>

namespace sessionrec {

std::vector<std::uint32_t> Catalog::gather_features(std::span<const std::size_t> items) const {
  std::vector<std::uint32_t> out;
  out.reserve(items.size() * feature_width);
  for (std::size_t v : items) {
    if (v >= size) {
      throw std::out_of_range("catalog: item " + std::to_string(v) + " >= " +
                              std::to_string(size));
    }
    const auto f = features_of(v);
    out.insert(out.end(), f.begin(), f.end());
  }
  return out;
}

namespace {

std::size_t fused_width(const EmbeddingConfig& cfg) {
  return cfg.d_id + cfg.features.size() * cfg.d_feature;
}

}  // namespace

template <typename T>
ItemEmbedding<T>::ItemEmbedding(const EmbeddingConfig& cfg, ParameterSet<T>& params,
                                std::mt19937_64& rng)
    : cfg_(cfg) {
  if (cfg.num_items == 0) throw std::invalid_argument("embedding: empty catalog");
  if (cfg.d == 0 || cfg.d_id == 0) throw std::invalid_argument("embedding: zero width");
  item_table_ = &params.add("embedding.item", cfg.num_items, cfg.d_id, /*sparse_rows=*/true);
  init_normal(*item_table_, rng);
  for (const auto& f : cfg.features) {
    if (f.cardinality == 0) {
      throw std::invalid_argument("embedding: feature '" + f.name + "' has no values");
    }
    auto& table = params.add("embedding.feature." + f.name, f.cardinality, cfg.d_feature, true);
    init_normal(table, rng);
    feature_tables_.push_back(&table);
  }
  // Fan-in scaled so the fusion keeps the table's scale; with 0.02 here too,
  // item vectors start ~1e-5 apart and training sits on a long plateau.
  const auto fan_in = [](std::size_t n) { return 1.0 / std::sqrt(static_cast<double>(n)); };
  hidden_ = Linear<T>(params, "embedding.fusion.hidden", fused_width(cfg), 2 * cfg.d, rng,
                      fan_in(fused_width(cfg)));
  out_ = Linear<T>(params, "embedding.fusion.out", 2 * cfg.d, cfg.d, rng, fan_in(2 * cfg.d));
}

template <typename T>
Var ItemEmbedding<T>::embed_items(Graph<T>& g, std::span<const std::size_t> ids,
                                  std::span<const std::uint32_t> features) const {
  const std::size_t c = feature_tables_.size();
  if (features.size() != ids.size() * c) {
    throw std::invalid_argument("embed_items: expected " + std::to_string(ids.size() * c) +
                                " feature values for " + std::to_string(ids.size()) +
                                " items, got " + std::to_string(features.size()));
  }
  std::vector<Var> parts;
  parts.reserve(c + 1);
  parts.push_back(g.lookup(*item_table_, ids));
  std::vector<std::size_t> column(ids.size());
  for (std::size_t f = 0; f < c; ++f) {
    for (std::size_t i = 0; i < ids.size(); ++i) column[i] = features[i * c + f];
    parts.push_back(g.lookup(*feature_tables_[f], column));
  }
  const Var fused = c == 0 ? parts.front() : g.concat_cols(parts);
  return out_(g, g.gelu(hidden_(g, fused)));
}

template <typename T>
Tensor<T> ItemEmbedding<T>::output_item_vectors(const Catalog& catalog) const {
  if (catalog.size != cfg_.num_items || catalog.feature_width != feature_tables_.size()) {
    throw std::invalid_argument("output_item_vectors: catalog (" + std::to_string(catalog.size) +
                                " items, " + std::to_string(catalog.feature_width) +
                                " features) does not match the embedding");
  }
  std::vector<std::size_t> ids(catalog.size);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  Graph<T> g(false);
  const Var out = embed_items(g, ids, catalog.features);
  return g.value(out);
}

template class ItemEmbedding<float>;
template class ItemEmbedding<double>;

}  // namespace sessionrec
