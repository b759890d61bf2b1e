#include <cmath>

#include "op_common.hpp"
#include "ssmhar/ops.hpp"

namespace ssmhar::ops {

using detail::check_finite;
using detail::maybe_record;

template <typename T>
Tensor<T> softmax(const Tensor<T>& a) {
  const Shape& sa = a.shape();
  if (sa.empty()) throw std::invalid_argument("softmax: rank-0 input");
  const std::size_t cols = sa.back();
  const std::size_t rows = a.numel() / cols;
  Tensor<T> out = Tensor<T>::uninit(sa);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* src = a.data() + r * cols;
    T* dst = out.data() + r * cols;
    T m = src[0];
    for (std::size_t c = 1; c < cols; ++c) m = std::max(m, src[c]);
    T z = T(0);
    for (std::size_t c = 0; c < cols; ++c) {
      dst[c] = std::exp(src[c] - m);
      z += dst[c];
    }
    const T inv = T(1) / z;
    for (std::size_t c = 0; c < cols; ++c) dst[c] *= inv;
  }
  check_finite(out, "softmax");
  maybe_record(a.requires_grad(), out, [a = a, out, rows, cols]() mutable {
    if (!out.has_grad()) return;
    const T* g = out.grad().data();
    auto& ga = a.grad_buf();
    for (std::size_t r = 0; r < rows; ++r) {
      const T* y = out.data() + r * cols;
      const T* gr = g + r * cols;
      T dot = T(0);
      for (std::size_t c = 0; c < cols; ++c) dot += gr[c] * y[c];
      T* dst = ga.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) dst[c] += y[c] * (gr[c] - dot);
    }
  });
  return out;
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain,
                     const Tensor<T>& offset, T eps) {
  const Shape& sx = x.shape();
  if (sx.empty()) throw std::invalid_argument("layer_norm: rank-0 input");
  const std::size_t d = sx.back();
  if (gain.numel() != d || offset.numel() != d) {
    detail::shape_error("layer_norm", sx, gain.shape());
  }
  const std::size_t rows = x.numel() / d;
  Tensor<T> out = Tensor<T>::uninit(sx);
  // xhat and 1/sigma are kept for the backward rule
  auto xhat = std::make_shared<std::vector<T>>(x.numel());
  auto inv_sigma = std::make_shared<std::vector<T>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* src = x.data() + r * d;
    T mu = T(0);
    for (std::size_t c = 0; c < d; ++c) mu += src[c];
    mu /= static_cast<T>(d);
    T var = T(0);
    for (std::size_t c = 0; c < d; ++c) {
      T dv = src[c] - mu;
      var += dv * dv;
    }
    var /= static_cast<T>(d);
    const T is = T(1) / std::sqrt(var + eps);
    (*inv_sigma)[r] = is;
    T* dst = out.data() + r * d;
    T* xh = xhat->data() + r * d;
    for (std::size_t c = 0; c < d; ++c) {
      xh[c] = (src[c] - mu) * is;
      dst[c] = gain.data()[c] * xh[c] + offset.data()[c];
    }
  }
  check_finite(out, "layer_norm");
  maybe_record(detail::any_requires_grad(x, gain, offset), out,
               [x = x, gain = gain, offset = offset, out, xhat, inv_sigma, rows, d]() mutable {
    if (!out.has_grad()) return;
    const T* g = out.grad().data();
    for (std::size_t r = 0; r < rows; ++r) {
      const T* gr = g + r * d;
      const T* xh = xhat->data() + r * d;
      if (gain.requires_grad()) {
        auto& gg = gain.grad_buf();
        for (std::size_t c = 0; c < d; ++c) gg[c] += gr[c] * xh[c];
      }
      if (offset.requires_grad()) {
        auto& go = offset.grad_buf();
        for (std::size_t c = 0; c < d; ++c) go[c] += gr[c];
      }
      if (x.requires_grad()) {
        T m1 = T(0), m2 = T(0);
        for (std::size_t c = 0; c < d; ++c) {
          T dxh = gr[c] * gain.data()[c];
          m1 += dxh;
          m2 += dxh * xh[c];
        }
        m1 /= static_cast<T>(d);
        m2 /= static_cast<T>(d);
        T* dst = x.grad_buf().data() + r * d;
        const T is = (*inv_sigma)[r];
        for (std::size_t c = 0; c < d; ++c) {
          T dxh = gr[c] * gain.data()[c];
          dst[c] += (dxh - m1 - xh[c] * m2) * is;
        }
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> revin_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, T eps) {
  const Shape& sx = x.shape();
  if (sx.size() != 3) {
    throw std::invalid_argument("revin_norm: expected (B,C,L), got " +
                                shape_str(sx));
  }
  const std::size_t bsz = sx[0], ch = sx[1], len = sx[2];
  if (len < 2) {
    throw std::invalid_argument("revin_norm: need at least 2 samples, got " +
                                std::to_string(len));
  }
  if (gamma.numel() != ch || beta.numel() != ch) {
    detail::shape_error("revin_norm", sx, gamma.shape());
  }
  Tensor<T> out = Tensor<T>::uninit(sx);
  const std::size_t rows = bsz * ch;
  auto xhat = std::make_shared<std::vector<T>>(x.numel());
  auto inv_sigma = std::make_shared<std::vector<T>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t c = r % ch;
    const T* src = x.data() + r * len;
    T mu = T(0);
    for (std::size_t t = 0; t < len; ++t) mu += src[t];
    mu /= static_cast<T>(len);
    T var = T(0);
    for (std::size_t t = 0; t < len; ++t) {
      T dv = src[t] - mu;
      var += dv * dv;
    }
    var /= static_cast<T>(len);  // population variance
    const T is = T(1) / std::sqrt(var + eps);
    (*inv_sigma)[r] = is;
    T* dst = out.data() + r * len;
    T* xh = xhat->data() + r * len;
    for (std::size_t t = 0; t < len; ++t) {
      xh[t] = (src[t] - mu) * is;
      dst[t] = gamma.data()[c] * xh[t] + beta.data()[c];
    }
  }
  check_finite(out, "revin_norm");
  maybe_record(detail::any_requires_grad(x, gamma, beta), out,
               [x = x, gamma = gamma, beta = beta, out, xhat, inv_sigma, rows, ch, len]() mutable {
    if (!out.has_grad()) return;
    const T* g = out.grad().data();
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t c = r % ch;
      const T* gr = g + r * len;
      const T* xh = xhat->data() + r * len;
      if (gamma.requires_grad()) {
        T acc = T(0);
        for (std::size_t t = 0; t < len; ++t) acc += gr[t] * xh[t];
        gamma.grad_buf()[c] += acc;
      }
      if (beta.requires_grad()) {
        T acc = T(0);
        for (std::size_t t = 0; t < len; ++t) acc += gr[t];
        beta.grad_buf()[c] += acc;
      }
      if (x.requires_grad()) {
        const T gc = gamma.data()[c];
        T m1 = T(0), m2 = T(0);
        for (std::size_t t = 0; t < len; ++t) {
          T dxh = gr[t] * gc;
          m1 += dxh;
          m2 += dxh * xh[t];
        }
        m1 /= static_cast<T>(len);
        m2 /= static_cast<T>(len);
        T* dst = x.grad_buf().data() + r * len;
        const T is = (*inv_sigma)[r];
        for (std::size_t t = 0; t < len; ++t) {
          T dxh = gr[t] * gc;
          dst[t] += (dxh - m1 - xh[t] * m2) * is;
        }
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels) {
  const Shape& s = logits.shape();
  if (s.size() != 2) {
    throw std::invalid_argument("cross_entropy: expected (B,C) logits, got " +
                                shape_str(s));
  }
  const std::size_t bsz = s[0], ncls = s[1];
  if (labels.size() != bsz) {
    throw std::invalid_argument("cross_entropy: " + std::to_string(labels.size()) +
                                " labels for batch of " + std::to_string(bsz));
  }
  for (std::size_t i = 0; i < bsz; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= ncls) {
      throw std::invalid_argument("cross_entropy: label " +
                                  std::to_string(labels[i]) + " at row " +
                                  std::to_string(i) + " outside [0," +
                                  std::to_string(ncls) + ")");
    }
  }
  T total = T(0);
  for (std::size_t i = 0; i < bsz; ++i) {
    const T* row = logits.data() + i * ncls;
    T m = row[0];
    for (std::size_t c = 1; c < ncls; ++c) m = std::max(m, row[c]);
    T z = T(0);
    for (std::size_t c = 0; c < ncls; ++c) z += std::exp(row[c] - m);
    total += (m + std::log(z)) - row[labels[i]];
  }
  Tensor<T> out = Tensor<T>::scalar(total / static_cast<T>(bsz));
  check_finite(out, "cross_entropy");
  maybe_record(logits.requires_grad(), out,
               [logits = logits, out, labels, bsz, ncls]() mutable {
    if (!out.has_grad()) return;
    const T g = out.grad()[0] / static_cast<T>(bsz);
    auto& gl = logits.grad_buf();
    for (std::size_t i = 0; i < bsz; ++i) {
      const T* row = logits.data() + i * ncls;
      T m = row[0];
      for (std::size_t c = 1; c < ncls; ++c) m = std::max(m, row[c]);
      T z = T(0);
      for (std::size_t c = 0; c < ncls; ++c) z += std::exp(row[c] - m);
      T* dst = gl.data() + i * ncls;
      for (std::size_t c = 0; c < ncls; ++c) {
        T p = std::exp(row[c] - m) / z;
        dst[c] += g * (p - (static_cast<std::size_t>(labels[i]) == c ? T(1) : T(0)));
      }
    }
  });
  return out;
}

#define SSMHAR_INSTANTIATE_NORM(T)                                             \
  template Tensor<T> softmax(const Tensor<T>&);                                \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&,            \
                                const Tensor<T>&, T);                          \
  template Tensor<T> revin_norm(const Tensor<T>&, const Tensor<T>&,            \
                                const Tensor<T>&, T);                          \
  template Tensor<T> cross_entropy(const Tensor<T>&, const std::vector<int>&);

SSMHAR_INSTANTIATE_NORM(float)
SSMHAR_INSTANTIATE_NORM(double)

}  // namespace ssmhar::ops
