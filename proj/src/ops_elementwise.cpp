#include <Eigen/Core>

#include "op_common.hpp"
#include "ssmhar/ops.hpp"

namespace ssmhar::ops {

using detail::any_requires_grad;
using detail::check_finite;
using detail::maybe_record;
using detail::suffix_repeat;

namespace {

template <typename T>
using ArrayMap = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
template <typename T>
using ConstArrayMap = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;

template <typename T>
ArrayMap<T> arr(Tensor<T>& t) {
  return ArrayMap<T>(t.data(), static_cast<Eigen::Index>(t.numel()));
}
template <typename T>
ConstArrayMap<T> arr(const Tensor<T>& t) {
  return ConstArrayMap<T>(t.data(), static_cast<Eigen::Index>(t.numel()));
}
template <typename T>
ArrayMap<T> arr(AlignedVec<T>& v) {
  return ArrayMap<T>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// out[i] = combine(a[i], b[i % nb]) with b tiling the suffix of a.
template <typename T, typename F>
void tiled_apply(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& out, F f) {
  const std::size_t nb = b.numel();
  const T* pa = a.data();
  const T* pb = b.data();
  T* po = out.data();
  const std::size_t n = a.numel();
  for (std::size_t base = 0; base < n; base += nb) {
    for (std::size_t j = 0; j < nb; ++j) po[base + j] = f(pa[base + j], pb[j]);
  }
}

// Accumulates g (shape of a) into b's grad by summing over the tiled copies.
template <typename T>
void reduce_into_suffix(const AlignedVec<T>& g, Tensor<T> b) {
  auto& gb = b.grad_buf();
  const std::size_t nb = gb.size();
  for (std::size_t base = 0; base < g.size(); base += nb) {
    for (std::size_t j = 0; j < nb; ++j) gb[j] += g[base + j];
  }
}

template <typename T>
void axpy_into(const AlignedVec<T>& g, Tensor<T> t, T factor = T(1)) {
  auto& gt = t.grad_buf();
  for (std::size_t i = 0; i < g.size(); ++i) gt[i] += factor * g[i];
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  suffix_repeat("add", a, b);
  Tensor<T> out = Tensor<T>::uninit(a.shape());
  tiled_apply(a, b, out, [](T x, T y) { return x + y; });
  check_finite(out, "add");
  maybe_record(any_requires_grad(a, b), out, [a = a, b = b, out]() mutable {
    if (!out.has_grad()) return;
    const auto& g = out.grad();
    if (a.requires_grad()) axpy_into(g, a);
    if (b.requires_grad()) reduce_into_suffix(g, b);
  });
  return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  suffix_repeat("sub", a, b);
  Tensor<T> out = Tensor<T>::uninit(a.shape());
  tiled_apply(a, b, out, [](T x, T y) { return x - y; });
  check_finite(out, "sub");
  maybe_record(any_requires_grad(a, b), out, [a = a, b = b, out]() mutable {
    if (!out.has_grad()) return;
    const auto& g = out.grad();
    if (a.requires_grad()) axpy_into(g, a);
    if (b.requires_grad()) {
      auto& gb = b.grad_buf();
      const std::size_t nb = gb.size();
      for (std::size_t base = 0; base < g.size(); base += nb) {
        for (std::size_t j = 0; j < nb; ++j) gb[j] -= g[base + j];
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  suffix_repeat("mul", a, b);
  Tensor<T> out = Tensor<T>::uninit(a.shape());
  tiled_apply(a, b, out, [](T x, T y) { return x * y; });
  check_finite(out, "mul");
  maybe_record(any_requires_grad(a, b), out, [a = a, b = b, out]() mutable {
    if (!out.has_grad()) return;
    const auto& g = out.grad();
    const std::size_t nb = b.numel();
    if (a.requires_grad()) {
      auto& ga = a.grad_buf();
      const T* pb = b.data();
      for (std::size_t base = 0; base < g.size(); base += nb) {
        for (std::size_t j = 0; j < nb; ++j) ga[base + j] += g[base + j] * pb[j];
      }
    }
    if (b.requires_grad()) {
      auto& gb = b.grad_buf();
      const T* pa = a.data();
      for (std::size_t base = 0; base < g.size(); base += nb) {
        for (std::size_t j = 0; j < nb; ++j) gb[j] += g[base + j] * pa[base + j];
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  Tensor<T> out = Tensor<T>::uninit(a.shape());
  arr(out) = arr(a) * factor;
  check_finite(out, "scale");
  maybe_record(a.requires_grad(), out, [a = a, out, factor]() mutable {
    if (!out.has_grad()) return;
    axpy_into(out.grad(), a, factor);
  });
  return out;
}

template <typename T>
Tensor<T> neg(const Tensor<T>& a) {
  return scale(a, T(-1));
}

template <typename T>
Tensor<T> exp(const Tensor<T>& a) {
  Tensor<T> out = Tensor<T>::uninit(a.shape());
  arr(out) = arr(a).exp();
  check_finite(out, "exp");
  maybe_record(a.requires_grad(), out, [a = a, out]() mutable {
    if (!out.has_grad()) return;
    const auto& g = out.grad();
    auto& ga = a.grad_buf();
    arr(ga) += ConstArrayMap<T>(g.data(), g.size()) * arr(out);
  });
  return out;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  Tensor<T> out = Tensor<T>::uninit(a.shape());
  arr(out) = T(1) / (T(1) + (-arr(a)).exp());
  check_finite(out, "sigmoid");
  maybe_record(a.requires_grad(), out, [a = a, out]() mutable {
    if (!out.has_grad()) return;
    const auto& g = out.grad();
    auto& ga = a.grad_buf();
    auto s = arr(out);
    arr(ga) += ConstArrayMap<T>(g.data(), g.size()) * s * (T(1) - s);
  });
  return out;
}

template <typename T>
Tensor<T> silu(const Tensor<T>& a) {
  Tensor<T> out = Tensor<T>::uninit(a.shape());
  auto x = arr(a);
  arr(out) = x / (T(1) + (-x).exp());
  check_finite(out, "silu");
  maybe_record(a.requires_grad(), out, [a = a, out]() mutable {
    if (!out.has_grad()) return;
    const auto& g = out.grad();
    auto& ga = a.grad_buf();
    auto x = arr(a);
    auto s = T(1) / (T(1) + (-x).exp());
    arr(ga) += ConstArrayMap<T>(g.data(), g.size()) * s * (T(1) + x * (T(1) - s));
  });
  return out;
}

template <typename T>
Tensor<T> softplus(const Tensor<T>& a) {
  Tensor<T> out = Tensor<T>::uninit(a.shape());
  // max(x,0) + log1p(exp(-|x|)) avoids overflow on both tails
  const T* pa = a.data();
  T* po = out.data();
  for (std::size_t i = 0; i < a.numel(); ++i) {
    T x = pa[i];
    po[i] = std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
  }
  check_finite(out, "softplus");
  maybe_record(a.requires_grad(), out, [a = a, out]() mutable {
    if (!out.has_grad()) return;
    const auto& g = out.grad();
    auto& ga = a.grad_buf();
    auto x = arr(a);
    arr(ga) += ConstArrayMap<T>(g.data(), g.size()) / (T(1) + (-x).exp());
  });
  return out;
}

#define SSMHAR_INSTANTIATE_ELEMENTWISE(T)                          \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);     \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);     \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);     \
  template Tensor<T> scale(const Tensor<T>&, T);                  \
  template Tensor<T> neg(const Tensor<T>&);                       \
  template Tensor<T> exp(const Tensor<T>&);                       \
  template Tensor<T> sigmoid(const Tensor<T>&);                   \
  template Tensor<T> silu(const Tensor<T>&);                      \
  template Tensor<T> softplus(const Tensor<T>&);

SSMHAR_INSTANTIATE_ELEMENTWISE(float)
SSMHAR_INSTANTIATE_ELEMENTWISE(double)

}  // namespace ssmhar::ops
