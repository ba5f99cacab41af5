#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sessionrec/tensor.hpp"

namespace sessionrec {

// A learnable tensor plus its gradient accumulator. Sparse parameters
// (embedding tables) also record which rows received gradient so the
// optimizer can leave untouched rows alone.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool sparse_rows = false;
  std::vector<std::uint8_t> touched;

  void zero_grad();
  void mark_row(std::size_t r) {
    if (sparse_rows) touched[r] = 1;
  }
};

template <typename T>
class ParameterSet {
 public:
  Parameter<T>& add(std::string name, std::size_t rows, std::size_t cols, bool sparse_rows = false);

  Parameter<T>& at(std::string_view name);
  const Parameter<T>& at(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::size_t count() const { return params_.size(); }
  Parameter<T>& operator[](std::size_t i) { return *params_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return *params_[i]; }

  void zero_grad();
  std::size_t total_size() const;

 private:
  // unique_ptr keeps addresses stable for graphs holding Parameter pointers.
  std::vector<std::unique_ptr<Parameter<T>>> params_;
};

struct Var {
  static constexpr std::uint32_t kInvalid = 0xffffffffu;
  std::uint32_t id = kInvalid;
  bool valid() const { return id != kInvalid; }
};

enum class Reduce { mean, max };

// none: every row sees every column. causal: row i sees columns 0..i.
enum class AttentionMask { none, causal };

// One independent softmax cross-entropy over logits[begin, end) whose
// correct class sits at flat index `target`.
struct XentGroup {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t target = 0;
};

struct GraphStats {
  // Score entries produced by softmax_rows, i.e. attention query-key pairs.
  std::uint64_t attention_pairs = 0;
};

// Computation record for reverse-mode differentiation. Ops append nodes in
// execution order; backward() walks them in exact reverse. A graph is built
// for one forward pass and discarded afterwards.
template <typename T>
class Graph {
 public:
  explicit Graph(bool record_backward = true) : record_(record_backward) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor<T> value);
  Var param(Parameter<T>& p);

  const Tensor<T>& value(Var v) const;
  Tensor<T>& grad(Var v);
  bool records_backward() const { return record_; }
  std::size_t size() const { return nodes_.size(); }
  const GraphStats& stats() const { return stats_; }

  // Seeds d(loss)/d(loss) = 1 and propagates to every node and parameter.
  void backward(Var loss);

  Var matmul(Var a, Var b, bool transpose_a = false, bool transpose_b = false);
  // b may also be a 1×cols row broadcast over the rows of a.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, T factor);
  Var sum(Var a);

  Var relu(Var a);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var gelu(Var a);
  Var layer_norm(Var x, Var gain, Var bias, T eps = T(1e-5));
  Var dropout(Var x, T rate, std::mt19937_64& rng);

  // Row-wise softmax of factor*scores under the mask; masked entries are 0.
  Var softmax_rows(Var scores, T factor, AttentionMask mask);

  // Sum over groups of -log softmax(logits[group])[target]. Logits are read
  // in flat row-major order. Returns a 1×1 scalar.
  Var softmax_xent(Var logits, std::span<const XentGroup> groups);
  Var softmax_xent_with_logits(Var logits, std::size_t target);

  // Reduces runs of equal ids; ids must be non-decreasing. Output has one row
  // per distinct id, in order.
  Var segment_reduce(Var x, std::span<const std::size_t> segment_ids, Reduce mode);

  Var gather_rows(Var x, std::span<const std::size_t> rows);
  Var lookup(Parameter<T>& table, std::span<const std::size_t> rows);
  Var gather_elements(Var x, std::span<const std::size_t> flat_index, std::size_t rows,
                      std::size_t cols);
  Var slice_cols(Var x, std::size_t begin, std::size_t count);
  Var concat_cols(std::span<const Var> parts);
  Var concat_rows(std::span<const Var> parts);

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    Parameter<T>* param = nullptr;
    std::function<void()> backward;
  };

  Var push(Tensor<T> value, std::function<void()> backward);
  const Node& node(Var v) const;
  Var unary(Var a, T (*f)(T), T (*df)(T, T));

  bool record_;
  std::deque<Node> nodes_;
  GraphStats stats_;
};

extern template struct Parameter<float>;
extern template struct Parameter<double>;
extern template class ParameterSet<float>;
extern template class ParameterSet<double>;
extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace sessionrec
