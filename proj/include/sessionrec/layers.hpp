#pragma once

#include <random>
#include <string>

#include "sessionrec/graph.hpp"

namespace sessionrec {

// Training mode enables dropout, drawing masks from `rng`.
struct ForwardContext {
  bool training = false;
  std::mt19937_64* rng = nullptr;

  bool dropout_active(double rate) const { return training && rng != nullptr && rate > 0.0; }
};

inline constexpr double kInitStddev = 0.02;

template <typename T>
void init_normal(Parameter<T>& p, std::mt19937_64& rng, double stddev = kInitStddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : p.value.values()) v = static_cast<T>(dist(rng));
}

template <typename T>
void init_constant(Parameter<T>& p, T value) {
  p.value.fill(value);
}

// y = x W + b
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(ParameterSet<T>& params, const std::string& name, std::size_t in, std::size_t out,
         std::mt19937_64& rng, double init_stddev = kInitStddev);

  Var operator()(Graph<T>& g, Var x) const;
  std::size_t out_features() const { return weight_->value.cols(); }

 private:
  Parameter<T>* weight_ = nullptr;
  Parameter<T>* bias_ = nullptr;
};

template <typename T>
class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParameterSet<T>& params, const std::string& name, std::size_t d);
  Var operator()(Graph<T>& g, Var x) const;

 private:
  Parameter<T>* gain_ = nullptr;
  Parameter<T>* bias_ = nullptr;
};

// Pre-normalization transformer block:
//   x = x + Dropout(MHA(LN(x)));  x = x + Dropout(FFN(LN(x)))
template <typename T>
class AttentionBlock {
 public:
  AttentionBlock() = default;
  AttentionBlock(ParameterSet<T>& params, const std::string& name, std::size_t d,
                 std::size_t heads, std::mt19937_64& rng);

  Var operator()(Graph<T>& g, Var x, AttentionMask mask, double dropout,
                 const ForwardContext& ctx) const;

 private:
  Var attention(Graph<T>& g, Var x, AttentionMask mask) const;

  std::size_t d_ = 0;
  std::size_t heads_ = 1;
  LayerNorm<T> ln_attn_, ln_ffn_;
  Linear<T> q_, k_, v_, o_, ffn_in_, ffn_out_;
};

// Gated recurrent layer over the rows of its input; returns every hidden state.
template <typename T>
class GruLayer {
 public:
  GruLayer() = default;
  GruLayer(ParameterSet<T>& params, const std::string& name, std::size_t in, std::size_t d,
           std::mt19937_64& rng);

  Var operator()(Graph<T>& g, Var x) const;

 private:
  std::size_t d_ = 0;
  Linear<T> input_, hidden_;
};

template <typename T>
Var apply_dropout(Graph<T>& g, Var x, double rate, const ForwardContext& ctx) {
  if (!ctx.dropout_active(rate)) return x;
  return g.dropout(x, static_cast<T>(rate), *ctx.rng);
}

extern template class Linear<float>;
extern template class Linear<double>;
extern template class LayerNorm<float>;
extern template class LayerNorm<double>;
extern template class AttentionBlock<float>;
extern template class AttentionBlock<double>;
extern template class GruLayer<float>;
extern template class GruLayer<double>;

}  // namespace sessionrec
