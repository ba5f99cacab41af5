#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sessionrec/config.hpp"
#include "sessionrec/layers.hpp"

namespace sessionrec {

// Scoring-side view of the item catalog: one canonical feature row per item.
struct Catalog {
  std::size_t size = 0;
  std::size_t feature_width = 0;
  std::vector<std::uint32_t> features;  // size × feature_width

  std::span<const std::uint32_t> features_of(std::size_t item) const {
    return {features.data() + item * feature_width, feature_width};
  }
  // Feature rows for a list of items, flattened.
  std::vector<std::uint32_t> gather_features(std::span<const std::size_t> items) const;
};

// Item-ID table, one table per discrete side feature, and a one-hidden-layer
// fusion perceptron over their concatenation:
//   E_v = W2 · gelu(W1 · [E_id ‖ E_f1 ‖ … ‖ E_fc] + b1) + b2
template <typename T>
class ItemEmbedding {
 public:
  ItemEmbedding(const EmbeddingConfig& cfg, ParameterSet<T>& params, std::mt19937_64& rng);

  // features: ids.size() × feature count, row-major.
  Var embed_items(Graph<T>& g, std::span<const std::size_t> ids,
                  std::span<const std::uint32_t> features) const;

  // Catalog-side vectors, produced by the same path as embed_items.
  Tensor<T> output_item_vectors(const Catalog& catalog) const;

  const EmbeddingConfig& config() const { return cfg_; }

 private:
  EmbeddingConfig cfg_;
  Parameter<T>* item_table_ = nullptr;
  std::vector<Parameter<T>*> feature_tables_;
  Linear<T> hidden_;
  Linear<T> out_;
};

extern template class ItemEmbedding<float>;
extern template class ItemEmbedding<double>;

}  // namespace sessionrec
