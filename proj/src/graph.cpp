#include "sessionrec/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sessionrec {

namespace {

// Plain loop kernels. Each output element is accumulated over k in ascending
// order, so a row's result does not depend on how many other rows share the
// call; embedding one item or the whole catalog gives bitwise-equal rows.

// c += a * b
template <typename T>
void gemm_nn(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  for (std::size_t i = 0; i < m; ++i) {
    T* ci = c.data() + i * n;
    const T* ai = a.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = ai[p];
      const T* bp = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

// c += a * b^T
template <typename T>
void gemm_nt(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  for (std::size_t i = 0; i < m; ++i) {
    const T* ai = a.data() + i * k;
    T* ci = c.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const T* bj = b.data() + j * k;
      T acc{0};
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] += acc;
    }
  }
}

// c += a^T * b
template <typename T>
void gemm_tn(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c) {
  const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
  for (std::size_t p = 0; p < k; ++p) {
    const T* ap = a.data() + p * m;
    const T* bp = b.data() + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T api = ap[i];
      T* ci = c.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

template <typename T>
Tensor<T> transposed(const Tensor<T>& a) {
  Tensor<T> t(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) t(c, r) = a(r, c);
  }
  return t;
}

// c += op(a) * op(b)
template <typename T>
void gemm(const Tensor<T>& a, bool ta, const Tensor<T>& b, bool tb, Tensor<T>& c) {
  if (!ta && !tb) gemm_nn(a, b, c);
  else if (!ta && tb) gemm_nt(a, b, c);
  else if (ta && !tb) gemm_tn(a, b, c);
  else gemm_nt(transposed(a), b, c);
}

}  // namespace

// ---------------------------------------------------------------- parameters

template <typename T>
void Parameter<T>::zero_grad() {
  if (!sparse_rows) {
    grad.fill(T{0});
    return;
  }
  for (std::size_t r = 0; r < touched.size(); ++r) {
    if (touched[r] == 0) continue;
    std::fill(grad.row(r).begin(), grad.row(r).end(), T{0});
    touched[r] = 0;
  }
}

template <typename T>
Parameter<T>& ParameterSet<T>::add(std::string name, std::size_t rows, std::size_t cols,
                                   bool sparse_rows) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter: " + name);
  auto p = std::make_unique<Parameter<T>>();
  p->name = std::move(name);
  p->value = Tensor<T>(rows, cols);
  p->grad = Tensor<T>(rows, cols);
  p->sparse_rows = sparse_rows;
  if (sparse_rows) p->touched.assign(rows, 0);
  params_.push_back(std::move(p));
  return *params_.back();
}

template <typename T>
Parameter<T>& ParameterSet<T>::at(std::string_view name) {
  for (auto& p : params_) {
    if (p->name == name) return *p;
  }
  throw std::out_of_range("unknown parameter: " + std::string(name));
}

template <typename T>
const Parameter<T>& ParameterSet<T>::at(std::string_view name) const {
  for (const auto& p : params_) {
    if (p->name == name) return *p;
  }
  throw std::out_of_range("unknown parameter: " + std::string(name));
}

template <typename T>
bool ParameterSet<T>::contains(std::string_view name) const {
  return std::any_of(params_.begin(), params_.end(),
                     [&](const auto& p) { return p->name == name; });
}

template <typename T>
void ParameterSet<T>::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

template <typename T>
std::size_t ParameterSet<T>::total_size() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

// ---------------------------------------------------------------- plumbing

template <typename T>
Var Graph<T>::push(Tensor<T> value, std::function<void()> backward) {
  if (nodes_.size() >= Var::kInvalid) throw std::length_error("graph: too many nodes");
  Node n;
  n.value = std::move(value);
  if (record_) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename T>
const typename Graph<T>::Node& Graph<T>::node(Var v) const {
  if (!v.valid() || v.id >= nodes_.size()) throw std::out_of_range("graph: invalid variable");
  return nodes_[v.id];
}

template <typename T>
Var Graph<T>::constant(Tensor<T> value) {
  return push(std::move(value), nullptr);
}

template <typename T>
Var Graph<T>::param(Parameter<T>& p) {
  Node n;
  n.param = &p;
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename T>
const Tensor<T>& Graph<T>::value(Var v) const {
  const Node& n = node(v);
  return n.param != nullptr ? n.param->value : n.value;
}

template <typename T>
Tensor<T>& Graph<T>::grad(Var v) {
  node(v);
  Node& n = nodes_[v.id];
  if (n.param != nullptr) return n.param->grad;
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor<T>(n.value.rows(), n.value.cols());
  return n.grad;
}

template <typename T>
void Graph<T>::backward(Var loss) {
  if (!record_) throw std::logic_error("graph: backward on a graph built without recording");
  const Tensor<T>& lv = value(loss);
  if (lv.size() != 1) throw ShapeError("backward: loss must be 1x1, got " + lv.shape_string());
  grad(loss)[0] += T{1};
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward && !n.grad.empty()) n.backward();
  }
}

// ---------------------------------------------------------------- linear algebra

template <typename T>
Var Graph<T>::matmul(Var a, Var b, bool transpose_a, bool transpose_b) {
  const Tensor<T>& av = value(a);
  const Tensor<T>& bv = value(b);
  const std::size_t m = transpose_a ? av.cols() : av.rows();
  const std::size_t k = transpose_a ? av.rows() : av.cols();
  const std::size_t kb = transpose_b ? bv.cols() : bv.rows();
  const std::size_t n = transpose_b ? bv.rows() : bv.cols();
  if (k != kb) {
    throw ShapeError("matmul: shape mismatch " + av.shape_string() + (transpose_a ? "^T" : "") +
                     " * " + bv.shape_string() + (transpose_b ? "^T" : ""));
  }
  Tensor<T> out(m, n);
  gemm(av, transpose_a, bv, transpose_b, out);
  Var out_var{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), [this, a, b, out_var, transpose_a, transpose_b] {
    const Tensor<T>& dc = nodes_[out_var.id].grad;
    const Tensor<T>& av = value(a);
    const Tensor<T>& bv = value(b);
    // C = op(A) op(B): d op(A) = dC op(B)^T, d op(B) = op(A)^T dC.
    Tensor<T>& da = grad(a);
    if (!transpose_a) gemm(dc, false, bv, !transpose_b, da);
    else gemm(bv, transpose_b, dc, true, da);
    Tensor<T>& db = grad(b);
    if (!transpose_b) gemm(av, !transpose_a, dc, false, db);
    else gemm(dc, true, av, transpose_a, db);
  });
}

template <typename T>
Var Graph<T>::add(Var a, Var b) {
  const Tensor<T>& av = value(a);
  const Tensor<T>& bv = value(b);
  const bool broadcast = !av.same_shape(bv);
  if (broadcast && !(bv.rows() == 1 && bv.cols() == av.cols())) {
    throw ShapeError("add: shape mismatch " + av.shape_string() + " + " + bv.shape_string());
  }
  Tensor<T> out = av;
  const std::size_t cols = av.cols();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += broadcast ? bv[i % cols] : bv[i];
  Var out_var{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), [this, a, b, out_var, broadcast, cols] {
    const Tensor<T>& g = nodes_[out_var.id].grad;
    Tensor<T>& ga = grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    Tensor<T>& gb = grad(b);
    for (std::size_t i = 0; i < g.size(); ++i) gb[broadcast ? i % cols : i] += g[i];
  });
}

template <typename T>
Var Graph<T>::sub(Var a, Var b) {
  return add(a, scale(b, T{-1}));
}

template <typename T>
Var Graph<T>::mul(Var a, Var b) {
  const Tensor<T>& av = value(a);
  const Tensor<T>& bv = value(b);
  if (!av.same_shape(bv)) {
    throw ShapeError("mul: shape mismatch " + av.shape_string() + " * " + bv.shape_string());
  }
  Tensor<T> out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  Var out_var{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), [this, a, b, out_var] {
    const Tensor<T>& g = nodes_[out_var.id].grad;
    const Tensor<T>& av = value(a);
    const Tensor<T>& bv = value(b);
    Tensor<T>& ga = grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    Tensor<T>& gb = grad(b);
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
  });
}

template <typename T>
Var Graph<T>::scale(Var a, T factor) {
  Tensor<T> out = value(a);
  for (auto& x : out.values()) x *= factor;
  Var out_var{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), [this, a, out_var, factor] {
    const Tensor<T>& g = nodes_[out_var.id].grad;
    Tensor<T>& ga = grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
  });
}

template <typename T>
Var Graph<T>::sum(Var a) {
  T total{0};
  for (T x : value(a).values()) total += x;
  Var out_var{static_cast<std::uint32_t>(nodes_.size())};
  return push(Tensor<T>(1, 1, total), [this, a, out_var] {
    const T g = nodes_[out_var.id].grad[0];
    for (auto& x : grad(a).values()) x += g;
  });
}

// ---------------------------------------------------------------- activations

template <typename T>
Var Graph<T>::unary(Var a, T (*f)(T), T (*df)(T, T)) {
  Tensor<T> out = value(a);
  for (auto& x : out.values()) x = f(x);
  Var out_var{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), [this, a, out_var, df] {
    const Tensor<T>& y = nodes_[out_var.id].value;
    const Tensor<T>& g = nodes_[out_var.id].grad;
    const Tensor<T>& x = value(a);
    Tensor<T>& ga = grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * df(x[i], y[i]);
  });
}

template <typename T>
Var Graph<T>::relu(Var a) {
  return unary(
      a, [](T x) { return x > T{0} ? x : T{0}; },
      [](T x, T) { return x > T{0} ? T{1} : T{0}; });
}

template <typename T>
Var Graph<T>::sigmoid(Var a) {
  return unary(
      a, [](T x) { return T{1} / (T{1} + std::exp(-x)); },
      [](T, T y) { return y * (T{1} - y); });
}

template <typename T>
Var Graph<T>::tanh(Var a) {
  return unary(
      a, [](T x) { return std::tanh(x); }, [](T, T y) { return T{1} - y * y; });
}

namespace {
template <typename T>
constexpr T kGeluC = T(0.7978845608028654);  // sqrt(2/pi)
template <typename T>
constexpr T kGeluA = T(0.044715);
}  // namespace

template <typename T>
Var Graph<T>::gelu(Var a) {
  // tanh approximation
  return unary(
      a,
      [](T x) {
        return T(0.5) * x * (T{1} + std::tanh(kGeluC<T> * (x + kGeluA<T> * x * x * x)));
      },
      [](T x, T) {
        const T t = std::tanh(kGeluC<T> * (x + kGeluA<T> * x * x * x));
        return T(0.5) * (T{1} + t) +
               T(0.5) * x * (T{1} - t * t) * kGeluC<T> * (T{1} + T{3} * kGeluA<T> * x * x);
      });
}

template <typename T>
Var Graph<T>::layer_norm(Var x, Var gain, Var bias, T eps) {
  const Tensor<T>& xv = value(x);
  const Tensor<T>& gv = value(gain);
  const Tensor<T>& bv = value(bias);
  const std::size_t n = xv.rows();
  const std::size_t d = xv.cols();
  if (gv.rows() != 1 || gv.cols() != d || !gv.same_shape(bv)) {
    throw ShapeError("layer_norm: gain/bias " + gv.shape_string() + "/" + bv.shape_string() +
                     " do not match input " + xv.shape_string());
  }
  Tensor<T> xhat(n, d);
  std::vector<T> rstd(n);
  Tensor<T> out(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    auto row = xv.row(r);
    T mean{0};
    for (T v : row) mean += v;
    mean /= T(d);
    T var{0};
    for (T v : row) var += (v - mean) * (v - mean);
    var /= T(d);
    rstd[r] = T{1} / std::sqrt(var + eps);
    for (std::size_t c = 0; c < d; ++c) {
      xhat(r, c) = (row[c] - mean) * rstd[r];
      out(r, c) = xhat(r, c) * gv[c] + bv[c];
    }
  }
  Var out_var{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), [this, x, gain, bias, out_var, xhat = std::move(xhat),
                               rstd = std::move(rstd)] {
    const Tensor<T>& g = nodes_[out_var.id].grad;
    const Tensor<T>& gv = value(gain);
    Tensor<T>& gx = grad(x);
    Tensor<T>& gg = grad(gain);
    Tensor<T>& gb = grad(bias);
    const std::size_t n = g.rows();
    const std::size_t d = g.cols();
    std::vector<T> dxhat(d);
    for (std::size_t r = 0; r < n; ++r) {
      T mean_dxhat{0};
      T mean_dxhat_xhat{0};
      for (std::size_t c = 0; c < d; ++c) {
        dxhat[c] = g(r, c) * gv[c];
        mean_dxhat += dxhat[c];
        mean_dxhat_xhat += dxhat[c] * xhat(r, c);
        gg[c] += g(r, c) * xhat(r, c);
        gb[c] += g(r, c);
      }
      mean_dxhat /= T(d);
      mean_dxhat_xhat /= T(d);
      for (std::size_t c = 0; c < d; ++c) {
        gx(r, c) += rstd[r] * (dxhat[c] - mean_dxhat - xhat(r, c) * mean_dxhat_xhat);
      }
    }
  });
}

template <typename T>
Var Graph<T>::dropout(Var x, T rate, std::mt19937_64& rng) {
  if (rate < T{0} || rate >= T{1}) throw std::invalid_argument("dropout: rate must be in [0,1)");
  if (rate == T{0}) return x;
  const Tensor<T>& xv = value(x);
  const T keep_scale = T{1} / (T{1} - rate);
  Tensor<T> mask(xv.rows(), xv.cols());
  for (auto& m : mask.values()) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    m = u >= static_cast<double>(rate) ? keep_scale : T{0};
  }
  Tensor<T> out = xv;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  Var out_var{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), [this, x, out_var, mask = std::move(mask)] {
    const Tensor<T>& g = nodes_[out_var.id].grad;
    Tensor<T>& gx = grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
  });
}

// ---------------------------------------------------------------- softmax family

template <typename T>
Var Graph<T>::softmax_rows(Var scores, T factor, AttentionMask mask) {
  const Tensor<T>& sv = value(scores);
  const std::size_t rows = sv.rows();
  const std::size_t cols = sv.cols();
  stats_.attention_pairs += static_cast<std::uint64_t>(rows) * cols;
  Tensor<T> out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t visible = mask == AttentionMask::causal ? std::min(cols, r + 1) : cols;
    if (visible == 0) continue;
    auto in = sv.row(r);
    auto y = out.row(r);
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t c = 0; c < visible; ++c) mx = std::max(mx, factor * in[c]);
    T total{0};
    for (std::size_t c = 0; c < visible; ++c) {
      y[c] = std::exp(factor * in[c] - mx);
      total += y[c];
    }
    for (std::size_t c = 0; c < visible; ++c) y[c] /= total;
  }
  Var out_var{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), [this, scores, out_var, factor] {
    const Tensor<T>& y = nodes_[out_var.id].value;
    const Tensor<T>& g = nodes_[out_var.id].grad;
    Tensor<T>& gs = grad(scores);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      auto yr = y.row(r);
      auto gr = g.row(r);
      T dot{0};
      for (std::size_t c = 0; c < yr.size(); ++c) dot += yr[c] * gr[c];
      auto out_row = gs.row(r);
      for (std::size_t c = 0; c < yr.size(); ++c) out_row[c] += factor * yr[c] * (gr[c] - dot);
    }
  });
}

template <typename T>
Var Graph<T>::softmax_xent(Var logits, std::span<const XentGroup> groups) {
  const Tensor<T>& lv = value(logits);
  std::vector<XentGroup> owned(groups.begin(), groups.end());
  std::vector<T> probs;
  std::size_t total_len = 0;
  for (const auto& grp : owned) {
    if (grp.begin >= grp.end || grp.end > lv.size() || grp.target < grp.begin ||
        grp.target >= grp.end) {
      throw std::out_of_range("softmax_xent: group [" + std::to_string(grp.begin) + "," +
                              std::to_string(grp.end) + ") target " +
                              std::to_string(grp.target) + " invalid for " +
                              std::to_string(lv.size()) + " logits");
    }
    total_len += grp.end - grp.begin;
  }
  probs.reserve(total_len);
  T loss{0};
  for (const auto& grp : owned) {
    std::size_t arg = grp.begin;
    for (std::size_t j = grp.begin; j < grp.end; ++j) {
      if (lv[j] > lv[arg]) arg = j;
    }
    const T mx = lv[arg];
    // log-sum-exp as max + log1p(sum of the others) keeps tiny losses exact.
    T rest{0};
    for (std::size_t j = grp.begin; j < grp.end; ++j) {
      if (j != arg) rest += std::exp(lv[j] - mx);
    }
    const T lse = mx + std::log1p(rest);
    loss += lse - lv[grp.target];
    for (std::size_t j = grp.begin; j < grp.end; ++j) probs.push_back(std::exp(lv[j] - lse));
  }
  Var out_var{static_cast<std::uint32_t>(nodes_.size())};
  return push(Tensor<T>(1, 1, loss),
              [this, logits, out_var, owned = std::move(owned), probs = std::move(probs)] {
                const T g = nodes_[out_var.id].grad[0];
                Tensor<T>& gl = grad(logits);
                std::size_t k = 0;
                for (const auto& grp : owned) {
                  for (std::size_t j = grp.begin; j < grp.end; ++j, ++k) gl[j] += g * probs[k];
                  gl[grp.target] -= g;
                }
              });
}

template <typename T>
Var Graph<T>::softmax_xent_with_logits(Var logits, std::size_t target) {
  const std::size_t c = value(logits).size();
  if (c < 2) throw std::invalid_argument("softmax_xent_with_logits: need at least 2 logits");
  if (target >= c) {
    throw std::out_of_range("softmax_xent_with_logits: target " + std::to_string(target) +
                            " >= " + std::to_string(c));
  }
  const XentGroup grp{0, c, target};
  return softmax_xent(logits, std::span<const XentGroup>(&grp, 1));
}

// ---------------------------------------------------------------- segments & gathers

template <typename T>
Var Graph<T>::segment_reduce(Var x, std::span<const std::size_t> segment_ids, Reduce mode) {
  const Tensor<T>& xv = value(x);
  const std::size_t n = xv.rows();
  const std::size_t d = xv.cols();
  if (segment_ids.size() != n) {
    throw ShapeError("segment_reduce: " + std::to_string(segment_ids.size()) +
                     " segment ids for " + std::to_string(n) + " rows");
  }
  std::vector<std::size_t> starts;  // first row of each segment, plus n
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && segment_ids[i] < segment_ids[i - 1]) {
      throw std::invalid_argument("segment_reduce: segment ids must be non-decreasing (row " +
                                  std::to_string(i) + ": " + std::to_string(segment_ids[i]) +
                                  " < " + std::to_string(segment_ids[i - 1]) + ")");
    }
    if (i == 0 || segment_ids[i] != segment_ids[i - 1]) starts.push_back(i);
  }
  starts.push_back(n);
  const std::size_t m = starts.size() - 1;
  Tensor<T> out(m, d);
  std::vector<std::size_t> argmax;
  if (mode == Reduce::max) argmax.assign(m * d, 0);
  for (std::size_t s = 0; s < m; ++s) {
    const std::size_t b = starts[s];
    const std::size_t e = starts[s + 1];
    auto o = out.row(s);
    std::copy(xv.row(b).begin(), xv.row(b).end(), o.begin());
    if (mode == Reduce::mean) {
      for (std::size_t r = b + 1; r < e; ++r) {
        auto xr = xv.row(r);
        for (std::size_t c = 0; c < d; ++c) o[c] += xr[c];
      }
      if (e - b > 1) {
        for (auto& v : o) v /= T(e - b);
      }
    } else {
      for (std::size_t c = 0; c < d; ++c) argmax[s * d + c] = b;
      for (std::size_t r = b + 1; r < e; ++r) {
        auto xr = xv.row(r);
        for (std::size_t c = 0; c < d; ++c) {
          if (xr[c] > o[c]) {  // strict: ties keep the first row
            o[c] = xr[c];
            argmax[s * d + c] = r;
          }
        }
      }
    }
  }
  Var out_var{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), [this, x, out_var, mode, starts = std::move(starts),
                               argmax = std::move(argmax)] {
    const Tensor<T>& g = nodes_[out_var.id].grad;
    Tensor<T>& gx = grad(x);
    const std::size_t d = g.cols();
    for (std::size_t s = 0; s + 1 < starts.size(); ++s) {
      auto gs = g.row(s);
      if (mode == Reduce::mean) {
        const T inv = T{1} / T(starts[s + 1] - starts[s]);
        for (std::size_t r = starts[s]; r < starts[s + 1]; ++r) {
          auto gr = gx.row(r);
          for (std::size_t c = 0; c < d; ++c) gr[c] += gs[c] * inv;
        }
      } else {
        for (std::size_t c = 0; c < d; ++c) gx(argmax[s * d + c], c) += gs[c];
      }
    }
  });
}

template <typename T>
Var Graph<T>::gather_rows(Var x, std::span<const std::size_t> rows) {
  const Tensor<T>& xv = value(x);
  Tensor<T> out(rows.size(), xv.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= xv.rows()) {
      throw std::out_of_range("gather_rows: row " + std::to_string(rows[i]) + " of " +
                              xv.shape_string());
    }
    std::copy(xv.row(rows[i]).begin(), xv.row(rows[i]).end(), out.row(i).begin());
  }
  Var out_var{static_cast<std::uint32_t>(nodes_.size())};
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return push(std::move(out), [this, x, out_var, idx = std::move(idx)] {
    const Tensor<T>& g = nodes_[out_var.id].grad;
    Tensor<T>& gx = grad(x);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      auto src = g.row(i);
      auto dst = gx.row(idx[i]);
      for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
    }
  });
}

template <typename T>
Var Graph<T>::lookup(Parameter<T>& table, std::span<const std::size_t> rows) {
  const Tensor<T>& tv = table.value;
  Tensor<T> out(rows.size(), tv.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= tv.rows()) {
      throw std::out_of_range("lookup " + table.name + ": id " + std::to_string(rows[i]) +
                              " out of vocabulary " + std::to_string(tv.rows()));
    }
    std::copy(tv.row(rows[i]).begin(), tv.row(rows[i]).end(), out.row(i).begin());
  }
  Var out_var{static_cast<std::uint32_t>(nodes_.size())};
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  Parameter<T>* p = &table;
  return push(std::move(out), [this, p, out_var, idx = std::move(idx)] {
    const Tensor<T>& g = nodes_[out_var.id].grad;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      auto src = g.row(i);
      auto dst = p->grad.row(idx[i]);
      for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
      p->mark_row(idx[i]);
    }
  });
}

template <typename T>
Var Graph<T>::gather_elements(Var x, std::span<const std::size_t> flat_index, std::size_t rows,
                              std::size_t cols) {
  const Tensor<T>& xv = value(x);
  if (flat_index.size() != rows * cols) {
    throw ShapeError("gather_elements: " + std::to_string(flat_index.size()) +
                     " indices for shape [" + std::to_string(rows) + "x" + std::to_string(cols) +
                     "]");
  }
  Tensor<T> out(rows, cols);
  for (std::size_t i = 0; i < flat_index.size(); ++i) {
    if (flat_index[i] >= xv.size()) {
      throw std::out_of_range("gather_elements: index " + std::to_string(flat_index[i]) +
                              " of " + xv.shape_string());
    }
    out[i] = xv[flat_index[i]];
  }
  Var out_var{static_cast<std::uint32_t>(nodes_.size())};
  std::vector<std::size_t> idx(flat_index.begin(), flat_index.end());
  return push(std::move(out), [this, x, out_var, idx = std::move(idx)] {
    const Tensor<T>& g = nodes_[out_var.id].grad;
    Tensor<T>& gx = grad(x);
    for (std::size_t i = 0; i < idx.size(); ++i) gx[idx[i]] += g[i];
  });
}

template <typename T>
Var Graph<T>::slice_cols(Var x, std::size_t begin, std::size_t count) {
  const Tensor<T>& xv = value(x);
  if (begin + count > xv.cols()) {
    throw ShapeError("slice_cols: [" + std::to_string(begin) + "," +
                     std::to_string(begin + count) + ") of " + xv.shape_string());
  }
  Tensor<T> out(xv.rows(), count);
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    std::copy_n(xv.row(r).begin() + static_cast<std::ptrdiff_t>(begin), count, out.row(r).begin());
  }
  Var out_var{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), [this, x, out_var, begin, count] {
    const Tensor<T>& g = nodes_[out_var.id].grad;
    Tensor<T>& gx = grad(x);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t c = 0; c < count; ++c) gx(r, begin + c) += g(r, c);
    }
  });
}

template <typename T>
Var Graph<T>::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const std::size_t rows = value(parts[0]).rows();
  std::size_t cols = 0;
  for (Var p : parts) {
    if (value(p).rows() != rows) {
      throw ShapeError("concat_cols: row mismatch " + value(parts[0]).shape_string() + " vs " +
                       value(p).shape_string());
    }
    cols += value(p).cols();
  }
  Tensor<T> out(rows, cols);
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor<T>& pv = value(p);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(pv.row(r).begin(), pv.row(r).end(),
                out.row(r).begin() + static_cast<std::ptrdiff_t>(offset));
    }
    offset += pv.cols();
  }
  Var out_var{static_cast<std::uint32_t>(nodes_.size())};
  std::vector<Var> owned(parts.begin(), parts.end());
  return push(std::move(out), [this, out_var, owned = std::move(owned)] {
    const Tensor<T>& g = nodes_[out_var.id].grad;
    std::size_t offset = 0;
    for (Var p : owned) {
      Tensor<T>& gp = grad(p);
      for (std::size_t r = 0; r < gp.rows(); ++r) {
        for (std::size_t c = 0; c < gp.cols(); ++c) gp(r, c) += g(r, offset + c);
      }
      offset += gp.cols();
    }
  });
}

template <typename T>
Var Graph<T>::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  const std::size_t cols = value(parts[0]).cols();
  std::size_t rows = 0;
  for (Var p : parts) {
    if (value(p).cols() != cols) {
      throw ShapeError("concat_rows: column mismatch " + value(parts[0]).shape_string() +
                       " vs " + value(p).shape_string());
    }
    rows += value(p).rows();
  }
  std::vector<T> values;
  values.reserve(rows * cols);
  for (Var p : parts) {
    const auto v = value(p).values();
    values.insert(values.end(), v.begin(), v.end());
  }
  Var out_var{static_cast<std::uint32_t>(nodes_.size())};
  std::vector<Var> owned(parts.begin(), parts.end());
  return push(Tensor<T>(rows, cols, std::move(values)), [this, out_var, owned = std::move(owned)] {
    const Tensor<T>& g = nodes_[out_var.id].grad;
    std::size_t offset = 0;
    for (Var p : owned) {
      Tensor<T>& gp = grad(p);
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offset + i];
      offset += gp.size();
    }
  });
}

template struct Parameter<float>;
template struct Parameter<double>;
template class ParameterSet<float>;
template class ParameterSet<double>;
template class Graph<float>;
template class Graph<double>;

}  // namespace sessionrec
