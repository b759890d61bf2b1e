#include "ssmhar/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace ssmhar {

template <typename T>
void AdamW<T>::step(const std::vector<std::pair<std::string, Tensor<T>*>>& params) {
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i].second->numel(), T(0));
      v_[i].assign(params[i].second->numel(), T(0));
    }
  } else if (m_.size() != params.size()) {
    throw std::invalid_argument("adamw: parameter list changed size");
  }

  step_ += 1;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double lr = cfg_.lr;
  const double decay_factor = 1.0 - lr * cfg_.weight_decay;

  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, t] = params[i];
    T* w = t->data();
    const std::size_t n = t->numel();
    const bool has_grad = t->has_grad();
    const T* g = has_grad ? t->grad().data() : nullptr;
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < n; ++j) {
      const double gj = has_grad ? static_cast<double>(g[j]) : 0.0;
      if (!std::isfinite(gj)) {
        throw std::runtime_error("adamw: non-finite gradient in parameter '" +
                                 name + "' at index " + std::to_string(j));
      }
      // decoupled decay first, independent of the gradient path
      double wj = static_cast<double>(w[j]) * decay_factor;
      double mj = b1 * static_cast<double>(m[j]) + (1.0 - b1) * gj;
      double vj = b2 * static_cast<double>(v[j]) + (1.0 - b2) * gj * gj;
      const double mhat = mj / bc1;
      const double vhat = vj / bc2;
      wj -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      w[j] = static_cast<T>(wj);
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
    }
  }
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace ssmhar
