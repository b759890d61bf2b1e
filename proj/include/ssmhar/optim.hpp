#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ssmhar/tensor.hpp"

namespace ssmhar {

struct OptimConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;
};

// AdamW: decoupled weight decay applied to the weights directly, then the
// bias-corrected Adam update from the gradient. With weight_decay == 0 this
// is exactly Adam.
template <typename T>
class AdamW {
 public:
  explicit AdamW(OptimConfig cfg) : cfg_(cfg) {}

  const OptimConfig& config() const { return cfg_; }
  std::int64_t step_count() const { return step_; }

  // One update over the registered parameter list. Gradients must be finite;
  // a non-finite gradient raises an error naming the parameter. Parameters
  // without an allocated gradient are treated as zero-gradient (decay still
  // applies).
  void step(const std::vector<std::pair<std::string, Tensor<T>*>>& params);

 private:
  OptimConfig cfg_;
  std::int64_t step_ = 0;
  // first/second moment per parameter, keyed by registry order
  std::vector<std::vector<T>> m_, v_;
};

extern template class AdamW<float>;
extern template class AdamW<double>;

}  // namespace ssmhar
