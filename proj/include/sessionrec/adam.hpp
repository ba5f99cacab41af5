#pragma once

#include <cstdint>
#include <vector>

#include "sessionrec/config.hpp"
#include "sessionrec/graph.hpp"

namespace sessionrec {

// Adam with lazy updates for sparse tables: rows that received no gradient
// in a step keep their value and moments.
template <typename T>
class Adam {
 public:
  Adam(ParameterSet<T>& params, const AdamConfig& cfg, double learning_rate);

  void step();

  std::uint64_t steps() const { return steps_; }
  void set_steps(std::uint64_t s) { steps_ = s; }
  std::vector<Tensor<T>>& first_moments() { return m_; }
  std::vector<Tensor<T>>& second_moments() { return v_; }
  const std::vector<Tensor<T>>& first_moments() const { return m_; }
  const std::vector<Tensor<T>>& second_moments() const { return v_; }

 private:
  ParameterSet<T>* params_;
  AdamConfig cfg_;
  double lr_;
  std::uint64_t steps_ = 0;
  std::vector<Tensor<T>> m_, v_;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace sessionrec
