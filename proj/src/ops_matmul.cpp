#include <Eigen/Core>

#include "op_common.hpp"
#include "ssmhar/ops.hpp"

namespace ssmhar::ops {

using detail::any_requires_grad;
using detail::check_finite;
using detail::maybe_record;

namespace {

template <typename T>
using MatMap =
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap = Eigen::Map<
    const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

template <typename T>
ConstMatMap<T> mat(const T* p, std::size_t r, std::size_t c) {
  return ConstMatMap<T>(p, static_cast<Eigen::Index>(r),
                        static_cast<Eigen::Index>(c));
}
template <typename T>
MatMap<T> mat(T* p, std::size_t r, std::size_t c) {
  return MatMap<T>(p, static_cast<Eigen::Index>(r),
                   static_cast<Eigen::Index>(c));
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() < 2 || sb.size() < 2) detail::shape_error("matmul", sa, sb);
  const std::size_t m = sa[sa.size() - 2];
  const std::size_t k = sa[sa.size() - 1];
  const std::size_t kb = sb[sb.size() - 2];
  const std::size_t n = sb[sb.size() - 1];
  if (k != kb) detail::shape_error("matmul", sa, sb);

  const bool b_batched = sb.size() > 2;
  std::size_t batches = 1;
  if (b_batched) {
    if (sb.size() != sa.size()) detail::shape_error("matmul", sa, sb);
    for (std::size_t i = 0; i + 2 < sa.size(); ++i) {
      if (sa[i] != sb[i]) detail::shape_error("matmul", sa, sb);
      batches *= sa[i];
    }
  } else {
    for (std::size_t i = 0; i + 2 < sa.size(); ++i) batches *= sa[i];
  }

  Shape so(sa);
  so[so.size() - 1] = n;
  Tensor<T> out = Tensor<T>::uninit(so);

  if (!b_batched) {
    // collapse all leading dims of a into rows of one GEMM
    mat(out.data(), batches * m, n).noalias() =
        mat(a.data(), batches * m, k) * mat(b.data(), k, n);
  } else {
    for (std::size_t i = 0; i < batches; ++i) {
      mat(out.data() + i * m * n, m, n).noalias() =
          mat(a.data() + i * m * k, m, k) * mat(b.data() + i * k * n, k, n);
    }
  }
  check_finite(out, "matmul");

  maybe_record(any_requires_grad(a, b), out,
               [a = a, b = b, out, m, k, n, batches, b_batched]() mutable {
    if (!out.has_grad()) return;
    const T* g = out.grad().data();
    if (!b_batched) {
      const std::size_t rows = batches * m;
      if (a.requires_grad()) {
        mat(a.grad_buf().data(), rows, k).noalias() +=
            mat(g, rows, n) * mat(b.data(), k, n).transpose();
      }
      if (b.requires_grad()) {
        mat(b.grad_buf().data(), k, n).noalias() +=
            mat(a.data(), rows, k).transpose() * mat(g, rows, n);
      }
    } else {
      for (std::size_t i = 0; i < batches; ++i) {
        if (a.requires_grad()) {
          mat(a.grad_buf().data() + i * m * k, m, k).noalias() +=
              mat(g + i * m * n, m, n) *
              mat(b.data() + i * k * n, k, n).transpose();
        }
        if (b.requires_grad()) {
          mat(b.grad_buf().data() + i * k * n, k, n).noalias() +=
              mat(a.data() + i * m * k, m, k).transpose() *
              mat(g + i * m * n, m, n);
        }
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> transpose_last2(const Tensor<T>& a) {
  const Shape& sa = a.shape();
  if (sa.size() < 2) {
    throw std::invalid_argument("transpose_last2: need rank >= 2, got " +
                                shape_str(sa));
  }
  const std::size_t m = sa[sa.size() - 2];
  const std::size_t n = sa[sa.size() - 1];
  std::size_t batches = a.numel() / (m * n);
  Shape so(sa);
  std::swap(so[so.size() - 2], so[so.size() - 1]);
  Tensor<T> out = Tensor<T>::uninit(so);
  for (std::size_t i = 0; i < batches; ++i) {
    const T* src = a.data() + i * m * n;
    T* dst = out.data() + i * m * n;
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < n; ++c) dst[c * m + r] = src[r * n + c];
  }
  maybe_record(a.requires_grad(), out, [a = a, out, m, n, batches]() mutable {
    if (!out.has_grad()) return;
    const T* g = out.grad().data();
    auto& ga = a.grad_buf();
    for (std::size_t i = 0; i < batches; ++i) {
      const T* gs = g + i * m * n;
      T* gd = ga.data() + i * m * n;
      for (std::size_t c = 0; c < n; ++c)
        for (std::size_t r = 0; r < m; ++r) gd[r * n + c] += gs[c * m + r];
    }
  });
  return out;
}

#define SSMHAR_INSTANTIATE_MATMUL(T)                              \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> transpose_last2(const Tensor<T>&);

SSMHAR_INSTANTIATE_MATMUL(float)
SSMHAR_INSTANTIATE_MATMUL(double)

}  // namespace ssmhar::ops
