#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ssmhar/rng.hpp"

namespace ssmhar {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// Payload buffers come from a size-bucketed free list: training allocates
// and releases the same large activation buffers every step, and recycling
// them avoids re-faulting fresh pages each time. Buffers are 64-byte
// aligned; besides the SIMD win, identical alignment makes vectorised
// elementwise kernels bit-stable across allocations (the prologue/packet
// split never depends on where the heap placed the buffer).
void* payload_alloc(std::size_t bytes);
void payload_free(void* p, std::size_t bytes) noexcept;

template <typename T>
struct AlignedAllocator {
  using value_type = T;
  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}
  T* allocate(std::size_t n) {
    return static_cast<T*>(payload_alloc(n * sizeof(T)));
  }
  void deallocate(T* p, std::size_t n) noexcept {
    payload_free(p, n * sizeof(T));
  }
  // value-less resize leaves trivial payloads uninitialised; ops that fully
  // overwrite their output rely on this (value-initialising ctors still
  // zero as usual)
  template <typename U>
  void construct(U*) noexcept {}
  template <typename U, typename... Args>
  void construct(U* p, Args&&... args) {
    ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
  }
  bool operator==(const AlignedAllocator&) const { return true; }
};

template <typename T>
using AlignedVec = std::vector<T, AlignedAllocator<T>>;

// Running total / high-water mark of tensor payload bytes. The bench command
// resets the peak before a measured forward+backward and reads it after.
struct AllocStats {
  static std::int64_t live_bytes();
  static std::int64_t peak_bytes();
  static void reset_peak();
  static void add(std::int64_t bytes);
  static void sub(std::int64_t bytes);
};

// Toggles a post-op finiteness sweep on every forward op (debug aid; on in
// tests, off by default in training for speed).
void set_debug_finite_checks(bool on);
bool debug_finite_checks();

template <typename T>
struct TensorImpl {
  Shape shape;
  AlignedVec<T> data;
  AlignedVec<T> grad;  // empty until first accumulation
  bool requires_grad = false;

  TensorImpl(Shape s, AlignedVec<T> d);
  ~TensorImpl();
  TensorImpl(const TensorImpl&) = delete;
  TensorImpl& operator=(const TensorImpl&) = delete;
};

// Dense row-major tensor handle with optional participation in reverse-mode
// gradient recording. Copies are shallow (shared storage); ops are
// functional and never mutate their inputs.
template <typename T>
class Tensor {
 public:
  using Scalar = T;

  Tensor() = default;
  explicit Tensor(Shape shape);               // zero-filled
  Tensor(Shape shape, AlignedVec<T> data);    // takes ownership
  Tensor(Shape shape, const std::vector<T>& data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  // uninitialised payload, for outputs that are fully overwritten
  static Tensor uninit(Shape shape);
  static Tensor full(Shape shape, T value);
  static Tensor scalar(T value) { return Tensor({1}, std::vector<T>{value}); }
  static Tensor from(const std::vector<T>& data, Shape shape);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t numel() const { return impl_->data.size(); }
  std::size_t dim(std::size_t i) const { return impl_->shape[i]; }

  T* data() { return impl_->data.data(); }
  const T* data() const { return impl_->data.data(); }
  AlignedVec<T>& values() { return impl_->data; }
  const AlignedVec<T>& values() const { return impl_->data; }

  T& at(std::size_t i) { return impl_->data[i]; }
  T at(std::size_t i) const { return impl_->data[i]; }
  T item() const;  // requires numel()==1

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  void set_requires_grad(bool rg) { impl_->requires_grad = rg; }

  // Gradient accumulator, zero-initialised on first access.
  AlignedVec<T>& grad_buf();
  const AlignedVec<T>& grad() const { return impl_->grad; }
  bool has_grad() const { return impl_ && !impl_->grad.empty(); }
  void zero_grad();

  // Deep copy of values (no grad, no recording).
  Tensor clone_detached() const;

  TensorImpl<T>* impl() const { return impl_.get(); }
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  std::shared_ptr<TensorImpl<T>> impl_;
};

// Reverse-mode tape: an ordered list of backward thunks. Ops append entries
// in execution order, so reverse traversal is a valid topological order and
// each node's gradient is complete before its producer's rule runs.
// A tape is confined to one logical thread; batch-parallel callers each own
// a private tape (see TapeScope).
template <typename T>
class GradTape {
 public:
  using BackwardFn = std::function<void()>;

  void record(BackwardFn fn) { entries_.push_back(std::move(fn)); }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  void clear() { entries_.clear(); }

  // Seeds d(loss)/d(loss)=1 and runs every backward rule exactly once in
  // reverse order. Entries are released as they run so activation memory is
  // returned progressively. The tape is empty afterwards.
  void backward(Tensor<T> loss);

  static GradTape<T>* active();

 private:
  template <typename U>
  friend class TapeScope;
  static GradTape<T>*& active_slot();
  std::vector<BackwardFn> entries_;
};

// RAII activation of a fresh tape on the current thread.
template <typename T>
class TapeScope {
 public:
  TapeScope() {
    prev_ = GradTape<T>::active_slot();
    GradTape<T>::active_slot() = &tape_;
  }
  ~TapeScope() { GradTape<T>::active_slot() = prev_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

  GradTape<T>& tape() { return tape_; }

 private:
  GradTape<T> tape_;
  GradTape<T>* prev_;
};

// Fill helpers (no recording).
template <typename T>
void fill_normal(Tensor<T>& t, RngStream& rng, double stddev, double mean = 0.0);
template <typename T>
void fill_uniform(Tensor<T>& t, RngStream& rng, double lo, double hi);

template <typename T>
Tensor<T> randn(Shape shape, RngStream& rng, double stddev = 1.0);

extern template struct TensorImpl<float>;
extern template struct TensorImpl<double>;
extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class GradTape<float>;
extern template class GradTape<double>;

}  // namespace ssmhar
