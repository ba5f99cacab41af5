#include "sessionrec/layers.hpp"

#include <cmath>

namespace sessionrec {

template <typename T>
Linear<T>::Linear(ParameterSet<T>& params, const std::string& name, std::size_t in,
                  std::size_t out, std::mt19937_64& rng, double init_stddev)
    : weight_(&params.add(name + ".w", in, out)), bias_(&params.add(name + ".b", 1, out)) {
  init_normal(*weight_, rng, init_stddev);
}

template <typename T>
Var Linear<T>::operator()(Graph<T>& g, Var x) const {
  return g.add(g.matmul(x, g.param(*weight_)), g.param(*bias_));
}

template <typename T>
LayerNorm<T>::LayerNorm(ParameterSet<T>& params, const std::string& name, std::size_t d)
    : gain_(&params.add(name + ".gain", 1, d)), bias_(&params.add(name + ".bias", 1, d)) {
  init_constant(*gain_, T{1});
}

template <typename T>
Var LayerNorm<T>::operator()(Graph<T>& g, Var x) const {
  return g.layer_norm(x, g.param(*gain_), g.param(*bias_));
}

template <typename T>
AttentionBlock<T>::AttentionBlock(ParameterSet<T>& params, const std::string& name,
                                  std::size_t d, std::size_t heads, std::mt19937_64& rng)
    : d_(d),
      heads_(heads),
      ln_attn_(params, name + ".ln_attn", d),
      ln_ffn_(params, name + ".ln_ffn", d),
      q_(params, name + ".q", d, d, rng),
      k_(params, name + ".k", d, d, rng),
      v_(params, name + ".v", d, d, rng),
      o_(params, name + ".o", d, d, rng),
      ffn_in_(params, name + ".ffn_in", d, 4 * d, rng),
      ffn_out_(params, name + ".ffn_out", 4 * d, d, rng) {
  if (heads == 0 || d % heads != 0) {
    throw std::invalid_argument(name + ": heads (" + std::to_string(heads) +
                                ") must divide d (" + std::to_string(d) + ")");
  }
}

template <typename T>
Var AttentionBlock<T>::attention(Graph<T>& g, Var x, AttentionMask mask) const {
  const Var q = q_(g, x);
  const Var k = k_(g, x);
  const Var v = v_(g, x);
  const std::size_t dh = d_ / heads_;
  const T factor = T{1} / std::sqrt(static_cast<T>(dh));
  std::vector<Var> outs;
  outs.reserve(heads_);
  for (std::size_t h = 0; h < heads_; ++h) {
    const Var qh = heads_ == 1 ? q : g.slice_cols(q, h * dh, dh);
    const Var kh = heads_ == 1 ? k : g.slice_cols(k, h * dh, dh);
    const Var vh = heads_ == 1 ? v : g.slice_cols(v, h * dh, dh);
    const Var weights = g.softmax_rows(g.matmul(qh, kh, false, true), factor, mask);
    outs.push_back(g.matmul(weights, vh));
  }
  const Var merged = heads_ == 1 ? outs.front() : g.concat_cols(outs);
  return o_(g, merged);
}

template <typename T>
Var AttentionBlock<T>::operator()(Graph<T>& g, Var x, AttentionMask mask, double dropout,
                                  const ForwardContext& ctx) const {
  Var h = g.add(x, apply_dropout(g, attention(g, ln_attn_(g, x), mask), dropout, ctx));
  const Var ffn = ffn_out_(g, g.gelu(ffn_in_(g, ln_ffn_(g, h))));
  return g.add(h, apply_dropout(g, ffn, dropout, ctx));
}

template <typename T>
GruLayer<T>::GruLayer(ParameterSet<T>& params, const std::string& name, std::size_t in,
                      std::size_t d, std::mt19937_64& rng)
    : d_(d), input_(params, name + ".input", in, 3 * d, rng), hidden_(params, name + ".hidden", d, 3 * d, rng) {}

template <typename T>
Var GruLayer<T>::operator()(Graph<T>& g, Var x) const {
  // Gate layout along columns: [reset | update | candidate].
  const std::size_t steps = g.value(x).rows();
  const Var projected = input_(g, x);
  Var h = g.constant(Tensor<T>(1, d_));
  std::vector<Var> states;
  states.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const std::size_t row = t;
    const Var xt = steps == 1 ? projected : g.gather_rows(projected, std::span(&row, 1));
    const Var ht = hidden_(g, h);
    const Var r = g.sigmoid(g.add(g.slice_cols(xt, 0, d_), g.slice_cols(ht, 0, d_)));
    const Var z = g.sigmoid(g.add(g.slice_cols(xt, d_, d_), g.slice_cols(ht, d_, d_)));
    const Var n =
        g.tanh(g.add(g.slice_cols(xt, 2 * d_, d_), g.mul(r, g.slice_cols(ht, 2 * d_, d_))));
    // h' = (1 - z) * n + z * h
    h = g.add(n, g.mul(z, g.sub(h, n)));
    states.push_back(h);
  }
  return states.size() == 1 ? states.front() : g.concat_rows(states);
}

template class Linear<float>;
template class Linear<double>;
template class LayerNorm<float>;
template class LayerNorm<double>;
template class AttentionBlock<float>;
template class AttentionBlock<double>;
template class GruLayer<float>;
template class GruLayer<double>;

}  // namespace sessionrec
