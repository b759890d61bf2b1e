#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "ssmhar/tensor.hpp"

// Internal helpers shared by the op implementation files.
namespace ssmhar::detail {

template <typename T>
bool any_requires_grad(const Tensor<T>& a) {
  return a.requires_grad();
}

template <typename T, typename... Rest>
bool any_requires_grad(const Tensor<T>& a, const Rest&... rest) {
  return a.requires_grad() || any_requires_grad(rest...);
}

// Marks `out` as grad-tracked and appends `fn` when recording applies.
template <typename T, typename Fn>
void maybe_record(bool inputs_need_grad, Tensor<T>& out, Fn&& fn) {
  auto* tape = GradTape<T>::active();
  if (tape != nullptr && inputs_need_grad) {
    out.set_requires_grad(true);
    tape->record(std::forward<Fn>(fn));
  }
}

template <typename T>
void check_finite(const Tensor<T>& t, const char* op) {
  if (!debug_finite_checks()) return;
  for (std::size_t i = 0; i < t.numel(); ++i) {
    if (!std::isfinite(static_cast<double>(t.data()[i]))) {
      throw std::runtime_error(std::string(op) +
                               ": non-finite value in output at flat index " +
                               std::to_string(i));
    }
  }
}

[[noreturn]] inline void shape_error(const char* op, const Shape& a,
                                     const Shape& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " +
                              shape_str(a) + " and " + shape_str(b));
}

// b must match a suffix of a's shape; returns how many copies of b tile a.
template <typename T>
std::size_t suffix_repeat(const char* op, const Tensor<T>& a,
                          const Tensor<T>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sb.size() > sa.size()) shape_error(op, sa, sb);
  std::size_t off = sa.size() - sb.size();
  for (std::size_t i = 0; i < sb.size(); ++i) {
    if (sa[off + i] != sb[i]) shape_error(op, sa, sb);
  }
  return a.numel() / (b.numel() == 0 ? 1 : b.numel());
}

inline std::size_t stride_of(const Shape& s, std::size_t axis) {
  std::size_t st = 1;
  for (std::size_t i = axis + 1; i < s.size(); ++i) st *= s[i];
  return st;
}

inline std::size_t outer_count(const Shape& s, std::size_t axis) {
  std::size_t n = 1;
  for (std::size_t i = 0; i < axis; ++i) n *= s[i];
  return n;
}

}  // namespace ssmhar::detail
