#include <cstring>

#include "op_common.hpp"
#include "ssmhar/ops.hpp"

namespace ssmhar::ops {

using detail::check_finite;
using detail::maybe_record;
using detail::outer_count;
using detail::stride_of;

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape new_shape) {
  if (shape_numel(new_shape) != a.numel()) {
    detail::shape_error("reshape", a.shape(), new_shape);
  }
  Tensor<T> out(std::move(new_shape), a.values());
  maybe_record(a.requires_grad(), out, [a = a, out]() mutable {
    if (!out.has_grad()) return;
    const auto& g = out.grad();
    auto& ga = a.grad_buf();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
  return out;
}

template <typename T>
Tensor<T> slice(const Tensor<T>& a, std::size_t axis, std::size_t start,
                std::size_t len) {
  const Shape& sa = a.shape();
  if (axis >= sa.size() || start + len > sa[axis]) {
    throw std::invalid_argument(
        "slice: range [" + std::to_string(start) + "," +
        std::to_string(start + len) + ") out of bounds for axis " +
        std::to_string(axis) + " of " + shape_str(sa));
  }
  Shape so(sa);
  so[axis] = len;
  Tensor<T> out = Tensor<T>::uninit(so);
  const std::size_t inner = stride_of(sa, axis);
  const std::size_t outer = outer_count(sa, axis);
  const std::size_t span = sa[axis] * inner;
  for (std::size_t o = 0; o < outer; ++o) {
    std::memcpy(out.data() + o * len * inner,
                a.data() + o * span + start * inner, len * inner * sizeof(T));
  }
  maybe_record(a.requires_grad(), out,
               [a = a, out, axis, start, len, inner, outer, span]() mutable {
    if (!out.has_grad()) return;
    const T* g = out.grad().data();
    auto& ga = a.grad_buf();
    for (std::size_t o = 0; o < outer; ++o) {
      T* dst = ga.data() + o * span + start * inner;
      const T* src = g + o * len * inner;
      for (std::size_t i = 0; i < len * inner; ++i) dst[i] += src[i];
    }
  });
  return out;
}

template <typename T>
Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b, std::size_t axis) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != sb.size() || axis >= sa.size()) {
    detail::shape_error("concat", sa, sb);
  }
  for (std::size_t i = 0; i < sa.size(); ++i) {
    if (i != axis && sa[i] != sb[i]) detail::shape_error("concat", sa, sb);
  }
  Shape so(sa);
  so[axis] += sb[axis];
  Tensor<T> out = Tensor<T>::uninit(so);
  const std::size_t inner = stride_of(sa, axis);
  const std::size_t outer = outer_count(sa, axis);
  const std::size_t span_a = sa[axis] * inner;
  const std::size_t span_b = sb[axis] * inner;
  for (std::size_t o = 0; o < outer; ++o) {
    std::memcpy(out.data() + o * (span_a + span_b), a.data() + o * span_a,
                span_a * sizeof(T));
    std::memcpy(out.data() + o * (span_a + span_b) + span_a,
                b.data() + o * span_b, span_b * sizeof(T));
  }
  maybe_record(detail::any_requires_grad(a, b), out,
               [a = a, b = b, out, outer, span_a, span_b]() mutable {
    if (!out.has_grad()) return;
    const T* g = out.grad().data();
    for (std::size_t o = 0; o < outer; ++o) {
      if (a.requires_grad()) {
        T* dst = a.grad_buf().data() + o * span_a;
        const T* src = g + o * (span_a + span_b);
        for (std::size_t i = 0; i < span_a; ++i) dst[i] += src[i];
      }
      if (b.requires_grad()) {
        T* dst = b.grad_buf().data() + o * span_b;
        const T* src = g + o * (span_a + span_b) + span_a;
        for (std::size_t i = 0; i < span_b; ++i) dst[i] += src[i];
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> flip(const Tensor<T>& a, std::size_t axis) {
  const Shape& sa = a.shape();
  if (axis >= sa.size()) {
    throw std::invalid_argument("flip: axis " + std::to_string(axis) +
                                " out of range for " + shape_str(sa));
  }
  Tensor<T> out = Tensor<T>::uninit(sa);
  const std::size_t inner = stride_of(sa, axis);
  const std::size_t outer = outer_count(sa, axis);
  const std::size_t n = sa[axis];
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < n; ++i) {
      std::memcpy(out.data() + (o * n + (n - 1 - i)) * inner,
                  a.data() + (o * n + i) * inner, inner * sizeof(T));
    }
  }
  maybe_record(a.requires_grad(), out, [a = a, out, inner, outer, n]() mutable {
    if (!out.has_grad()) return;
    const T* g = out.grad().data();
    auto& ga = a.grad_buf();
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t i = 0; i < n; ++i) {
        T* dst = ga.data() + (o * n + i) * inner;
        const T* src = g + (o * n + (n - 1 - i)) * inner;
        for (std::size_t j = 0; j < inner; ++j) dst[j] += src[j];
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> expand_last(const Tensor<T>& a, std::size_t n) {
  const Shape& sa = a.shape();
  if (sa.empty() || sa.back() != 1) {
    throw std::invalid_argument("expand_last: needs trailing axis 1, got " +
                                shape_str(sa));
  }
  Shape so(sa);
  so.back() = n;
  Tensor<T> out = Tensor<T>::uninit(so);
  const std::size_t rows = a.numel();
  for (std::size_t r = 0; r < rows; ++r) {
    T v = a.data()[r];
    T* dst = out.data() + r * n;
    for (std::size_t j = 0; j < n; ++j) dst[j] = v;
  }
  maybe_record(a.requires_grad(), out, [a = a, out, rows, n]() mutable {
    if (!out.has_grad()) return;
    const T* g = out.grad().data();
    auto& ga = a.grad_buf();
    for (std::size_t r = 0; r < rows; ++r) {
      T acc = T(0);
      const T* src = g + r * n;
      for (std::size_t j = 0; j < n; ++j) acc += src[j];
      ga[r] += acc;
    }
  });
  return out;
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& a) {
  T acc = T(0);
  for (std::size_t i = 0; i < a.numel(); ++i) acc += a.data()[i];
  Tensor<T> out = Tensor<T>::scalar(acc);
  maybe_record(a.requires_grad(), out, [a = a, out]() mutable {
    if (!out.has_grad()) return;
    const T g = out.grad()[0];
    auto& ga = a.grad_buf();
    for (auto& v : ga) v += g;
  });
  return out;
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& a) {
  return scale(sum_all(a), T(1) / static_cast<T>(a.numel()));
}

template <typename T>
Tensor<T> mean_axis(const Tensor<T>& a, std::size_t axis) {
  const Shape& sa = a.shape();
  if (axis >= sa.size()) {
    throw std::invalid_argument("mean_axis: axis " + std::to_string(axis) +
                                " out of range for " + shape_str(sa));
  }
  Shape so;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    if (i != axis) so.push_back(sa[i]);
  }
  if (so.empty()) so.push_back(1);
  Tensor<T> out = Tensor<T>::uninit(so);
  const std::size_t inner = stride_of(sa, axis);
  const std::size_t outer = outer_count(sa, axis);
  const std::size_t n = sa[axis];
  const T inv = T(1) / static_cast<T>(n);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t j = 0; j < inner; ++j) {
      T acc = T(0);
      for (std::size_t i = 0; i < n; ++i) acc += a.data()[(o * n + i) * inner + j];
      out.data()[o * inner + j] = acc * inv;
    }
  }
  maybe_record(a.requires_grad(), out, [a = a, out, inner, outer, n, inv]() mutable {
    if (!out.has_grad()) return;
    const T* g = out.grad().data();
    auto& ga = a.grad_buf();
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t i = 0; i < n; ++i) {
        T* dst = ga.data() + (o * n + i) * inner;
        const T* src = g + o * inner;
        for (std::size_t j = 0; j < inner; ++j) dst[j] += src[j] * inv;
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> patchify(const Tensor<T>& x, std::size_t p, std::size_t s,
                   bool channel_major) {
  const Shape& sx = x.shape();
  if (sx.size() != 3) {
    throw std::invalid_argument("patchify: expected (B,C,L), got " +
                                shape_str(sx));
  }
  const std::size_t bsz = sx[0], ch = sx[1], len = sx[2];
  if (p == 0 || p > len) {
    throw std::invalid_argument("patchify: patch length " + std::to_string(p) +
                                " invalid for sequence length " +
                                std::to_string(len));
  }
  if (s == 0) throw std::invalid_argument("patchify: stride must be >= 1");
  const std::size_t n = (len - p) / s + 1;

  Shape so = channel_major ? Shape{bsz, ch * n, p} : Shape{bsz, n, p * ch};
  Tensor<T> out = Tensor<T>::uninit(so);
  for (std::size_t b = 0; b < bsz; ++b) {
    for (std::size_t c = 0; c < ch; ++c) {
      const T* src = x.data() + (b * ch + c) * len;
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t t = 0; t < p; ++t) {
          T v = src[j * s + t];
          if (channel_major) {
            out.data()[((b * ch + c) * n + j) * p + t] = v;
          } else {
            out.data()[(b * n + j) * p * ch + t * ch + c] = v;
          }
        }
      }
    }
  }
  maybe_record(x.requires_grad(), out,
               [x = x, out, bsz, ch, len, p, s, n, channel_major]() mutable {
    if (!out.has_grad()) return;
    const T* g = out.grad().data();
    auto& gx = x.grad_buf();
    for (std::size_t b = 0; b < bsz; ++b) {
      for (std::size_t c = 0; c < ch; ++c) {
        T* dst = gx.data() + (b * ch + c) * len;
        for (std::size_t j = 0; j < n; ++j) {
          for (std::size_t t = 0; t < p; ++t) {
            T gv = channel_major
                       ? g[((b * ch + c) * n + j) * p + t]
                       : g[(b * n + j) * p * ch + t * ch + c];
            dst[j * s + t] += gv;  // overlapping patches accumulate
          }
        }
      }
    }
  });
  return out;
}

#define SSMHAR_INSTANTIATE_SHAPE(T)                                           \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                        \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t,        \
                           std::size_t);                                      \
  template Tensor<T> concat(const Tensor<T>&, const Tensor<T>&, std::size_t); \
  template Tensor<T> flip(const Tensor<T>&, std::size_t);                     \
  template Tensor<T> expand_last(const Tensor<T>&, std::size_t);              \
  template Tensor<T> sum_all(const Tensor<T>&);                               \
  template Tensor<T> mean_all(const Tensor<T>&);                              \
  template Tensor<T> mean_axis(const Tensor<T>&, std::size_t);                \
  template Tensor<T> patchify(const Tensor<T>&, std::size_t, std::size_t, bool);

SSMHAR_INSTANTIATE_SHAPE(float)
SSMHAR_INSTANTIATE_SHAPE(double)

}  // namespace ssmhar::ops
