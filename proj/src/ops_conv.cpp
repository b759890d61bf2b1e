#include "op_common.hpp"
#include "ssmhar/ops.hpp"

namespace ssmhar::ops {

using detail::check_finite;
using detail::maybe_record;

template <typename T>
Tensor<T> causal_conv1d(const Tensor<T>& x, const Tensor<T>& kernel,
                        const Tensor<T>& bias) {
  const Shape& sx = x.shape();
  const Shape& sk = kernel.shape();
  if (sx.size() != 3 || sk.size() != 2) {
    detail::shape_error("causal_conv1d", sx, sk);
  }
  const std::size_t bsz = sx[0], len = sx[1], ch = sx[2];
  const std::size_t k = sk[1];
  if (sk[0] != ch || bias.numel() != ch) {
    detail::shape_error("causal_conv1d", sx, sk);
  }
  if (k == 0) {
    throw std::invalid_argument("causal_conv1d: kernel width must be >= 1");
  }
  // k > len is fine: taps beyond the start only see the zero left pad.
  Tensor<T> out = Tensor<T>::uninit(sx);
  for (std::size_t b = 0; b < bsz; ++b) {
    const T* xb = x.data() + b * len * ch;
    T* ob = out.data() + b * len * ch;
    for (std::size_t t = 0; t < len; ++t) {
      const std::size_t taps = std::min(k, t + 1);
      T* orow = ob + t * ch;
      for (std::size_t e = 0; e < ch; ++e) orow[e] = bias.data()[e];
      for (std::size_t i = 0; i < taps; ++i) {
        const T* xrow = xb + (t - i) * ch;
        const T* krow = kernel.data();  // (E,k): kernel[e*k + i]
        for (std::size_t e = 0; e < ch; ++e) orow[e] += krow[e * k + i] * xrow[e];
      }
    }
  }
  check_finite(out, "causal_conv1d");
  maybe_record(detail::any_requires_grad(x, kernel, bias), out,
               [x = x, kernel = kernel, bias = bias, out, bsz, len, ch, k]() mutable {
    if (!out.has_grad()) return;
    const T* g = out.grad().data();
    for (std::size_t b = 0; b < bsz; ++b) {
      const T* gb = g + b * len * ch;
      const T* xb = x.data() + b * len * ch;
      for (std::size_t t = 0; t < len; ++t) {
        const std::size_t taps = std::min(k, t + 1);
        const T* grow = gb + t * ch;
        if (bias.requires_grad()) {
          auto& gbias = bias.grad_buf();
          for (std::size_t e = 0; e < ch; ++e) gbias[e] += grow[e];
        }
        for (std::size_t i = 0; i < taps; ++i) {
          const T* xrow = xb + (t - i) * ch;
          if (kernel.requires_grad()) {
            auto& gk = kernel.grad_buf();
            for (std::size_t e = 0; e < ch; ++e) gk[e * k + i] += grow[e] * xrow[e];
          }
          if (x.requires_grad()) {
            T* gx = x.grad_buf().data() + (b * len + (t - i)) * ch;
            const T* krow = kernel.data();
            for (std::size_t e = 0; e < ch; ++e) gx[e] += grow[e] * krow[e * k + i];
          }
        }
      }
    }
  });
  return out;
}

template Tensor<float> causal_conv1d(const Tensor<float>&, const Tensor<float>&,
                                     const Tensor<float>&);
template Tensor<double> causal_conv1d(const Tensor<double>&,
                                      const Tensor<double>&,
                                      const Tensor<double>&);

}  // namespace ssmhar::ops
