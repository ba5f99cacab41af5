#include "sessionrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

namespace sessionrec {

namespace {

template <typename T>
std::vector<std::size_t> top_k_impl(std::span<const T> scores, std::size_t k) {
  if (k > scores.size()) {
    throw std::invalid_argument("top_k: k = " + std::to_string(k) + " exceeds " +
                                std::to_string(scores.size()) + " items");
  }
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  const auto before = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  if (k < idx.size()) {
    std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), before);
    idx.resize(k);
  }
  std::sort(idx.begin(), idx.end(), before);
  return idx;
}

std::unordered_set<std::size_t> target_set(std::span<const std::size_t> targets,
                                           const char* who) {
  if (targets.empty()) throw std::invalid_argument(std::string(who) + ": empty target set");
  return {targets.begin(), targets.end()};
}

}  // namespace

std::vector<std::size_t> top_k(std::span<const float> scores, std::size_t k) {
  return top_k_impl(scores, k);
}

std::vector<std::size_t> top_k(std::span<const double> scores, std::size_t k) {
  return top_k_impl(scores, k);
}

template <typename T>
std::vector<std::size_t> top_k(const Tensor<T>& user_vec, const Tensor<T>& item_vecs,
                               std::size_t k) {
  if (user_vec.rows() != 1 || user_vec.cols() != item_vecs.cols()) {
    throw ShapeError("top_k: user " + user_vec.shape_string() + " vs items " +
                     item_vecs.shape_string());
  }
  std::vector<T> scores(item_vecs.rows());
  const auto u = user_vec.row(0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto v = item_vecs.row(i);
    T s{0};
    for (std::size_t c = 0; c < v.size(); ++c) s += u[c] * v[c];
    scores[i] = s;
  }
  return top_k_impl(std::span<const T>(scores), k);
}

template std::vector<std::size_t> top_k(const Tensor<float>&, const Tensor<float>&, std::size_t);
template std::vector<std::size_t> top_k(const Tensor<double>&, const Tensor<double>&, std::size_t);

double recall_at_k(std::span<const std::size_t> ranked, std::span<const std::size_t> targets,
                   std::size_t k) {
  const auto set = target_set(targets, "recall_at_k");
  const std::size_t n = std::min(k, ranked.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) hits += set.count(ranked[i]);
  return static_cast<double>(hits) / static_cast<double>(set.size());
}

double ndcg_at_k(std::span<const std::size_t> ranked, std::span<const std::size_t> targets,
                 std::size_t k) {
  const auto set = target_set(targets, "ndcg_at_k");
  const std::size_t n = std::min(k, ranked.size());
  double dcg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (set.count(ranked[i]) != 0) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  }
  double idcg = 0.0;
  const std::size_t ideal = std::min(k, set.size());
  for (std::size_t i = 0; i < ideal; ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return idcg > 0.0 ? dcg / idcg : 0.0;
}

}  // namespace sessionrec
