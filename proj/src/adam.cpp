#include "sessionrec/adam.hpp"

#include <cmath>

namespace sessionrec {

template <typename T>
Adam<T>::Adam(ParameterSet<T>& params, const AdamConfig& cfg, double learning_rate)
    : params_(&params), cfg_(cfg), lr_(learning_rate) {
  for (std::size_t i = 0; i < params.count(); ++i) {
    const auto& p = params[i];
    m_.emplace_back(p.value.rows(), p.value.cols());
    v_.emplace_back(p.value.rows(), p.value.cols());
  }
}

template <typename T>
void Adam<T>::step() {
  ++steps_;
  const double t = static_cast<double>(steps_);
  const T b1 = static_cast<T>(cfg_.beta1);
  const T b2 = static_cast<T>(cfg_.beta2);
  const T c1 = static_cast<T>(1.0 / (1.0 - std::pow(cfg_.beta1, t)));
  const T c2 = static_cast<T>(1.0 / (1.0 - std::pow(cfg_.beta2, t)));
  const T lr = static_cast<T>(lr_);
  const T eps = static_cast<T>(cfg_.eps);

  auto update = [&](T* w, const T* g, T* m, T* v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = b1 * m[i] + (T{1} - b1) * g[i];
      v[i] = b2 * v[i] + (T{1} - b2) * g[i] * g[i];
      w[i] -= lr * (m[i] * c1) / (std::sqrt(v[i] * c2) + eps);
    }
  };

  for (std::size_t k = 0; k < params_->count(); ++k) {
    auto& p = (*params_)[k];
    if (!p.sparse_rows) {
      update(p.value.data(), p.grad.data(), m_[k].data(), v_[k].data(), p.value.size());
      continue;
    }
    const std::size_t cols = p.value.cols();
    for (std::size_t r = 0; r < p.touched.size(); ++r) {
      if (p.touched[r] == 0) continue;
      const std::size_t off = r * cols;
      update(p.value.data() + off, p.grad.data() + off, m_[k].data() + off, v_[k].data() + off,
             cols);
    }
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace sessionrec
