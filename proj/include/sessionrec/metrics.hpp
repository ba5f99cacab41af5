#pragma once

#include <span>
#include <vector>

#include "sessionrec/tensor.hpp"

namespace sessionrec {

// Exact top-k by score, descending; equal scores rank the lower id first.
std::vector<std::size_t> top_k(std::span<const float> scores, std::size_t k);
std::vector<std::size_t> top_k(std::span<const double> scores, std::size_t k);
// Scores every catalog row against user_vec (1×d) and ranks them.
template <typename T>
std::vector<std::size_t> top_k(const Tensor<T>& user_vec, const Tensor<T>& item_vecs,
                               std::size_t k);

// |ranked[0..k) ∩ targets| / |targets|. Duplicate targets count once.
double recall_at_k(std::span<const std::size_t> ranked, std::span<const std::size_t> targets,
                   std::size_t k);
// Binary-relevance NDCG; the ideal ranking places min(k, |targets|) hits first.
double ndcg_at_k(std::span<const std::size_t> ranked, std::span<const std::size_t> targets,
                 std::size_t k);

}  // namespace sessionrec
