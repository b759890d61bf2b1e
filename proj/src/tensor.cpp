#include "ssmhar/tensor.hpp"

#include <cmath>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace ssmhar {

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << ")";
  return os.str();
}

namespace {
std::atomic<std::int64_t> g_live{0};
std::atomic<std::int64_t> g_peak{0};
bool g_debug_finite = false;

// Free-listed payload buffers, bucketed by exact byte size. Training reuses
// identical shapes step after step, so exact-size buckets recycle cleanly.
struct PayloadPool {
  std::mutex mu;
  std::unordered_map<std::size_t, std::vector<void*>> free_lists;

  ~PayloadPool() {
    for (auto& [size, list] : free_lists) {
      for (void* p : list) ::operator delete(p, std::align_val_t(64));
    }
  }
};

PayloadPool& pool() {
  static PayloadPool* p = new PayloadPool();  // leaked on purpose: outlives
  return *p;                                  // static tensors at shutdown
}
}  // namespace

void* payload_alloc(std::size_t bytes) {
  if (bytes == 0) bytes = 1;
  {
    std::lock_guard<std::mutex> lock(pool().mu);
    auto it = pool().free_lists.find(bytes);
    if (it != pool().free_lists.end() && !it->second.empty()) {
      void* p = it->second.back();
      it->second.pop_back();
      return p;
    }
  }
  return ::operator new(bytes, std::align_val_t(64));
}

void payload_free(void* p, std::size_t bytes) noexcept {
  if (p == nullptr) return;
  if (bytes == 0) bytes = 1;
  std::lock_guard<std::mutex> lock(pool().mu);
  pool().free_lists[bytes].push_back(p);
}

std::int64_t AllocStats::live_bytes() { return g_live.load(); }
std::int64_t AllocStats::peak_bytes() { return g_peak.load(); }
void AllocStats::reset_peak() { g_peak.store(g_live.load()); }
void AllocStats::add(std::int64_t bytes) {
  std::int64_t now = g_live.fetch_add(bytes) + bytes;
  std::int64_t peak = g_peak.load();
  while (now > peak && !g_peak.compare_exchange_weak(peak, now)) {
  }
}
void AllocStats::sub(std::int64_t bytes) { g_live.fetch_sub(bytes); }

void set_debug_finite_checks(bool on) { g_debug_finite = on; }
bool debug_finite_checks() { return g_debug_finite; }

template <typename T>
TensorImpl<T>::TensorImpl(Shape s, AlignedVec<T> d)
    : shape(std::move(s)), data(std::move(d)) {
  if (shape_numel(shape) != data.size()) {
    throw std::invalid_argument("tensor: shape " + shape_str(shape) +
                                " does not match value count " +
                                std::to_string(data.size()));
  }
  AllocStats::add(static_cast<std::int64_t>(data.size() * sizeof(T)));
}

template <typename T>
TensorImpl<T>::~TensorImpl() {
  AllocStats::sub(static_cast<std::int64_t>((data.size() + grad.size()) * sizeof(T)));
}

template <typename T>
Tensor<T>::Tensor(Shape shape)
    : impl_(std::make_shared<TensorImpl<T>>(
          shape, AlignedVec<T>(shape_numel(shape), T(0)))) {}

template <typename T>
Tensor<T>::Tensor(Shape shape, AlignedVec<T> data)
    : impl_(std::make_shared<TensorImpl<T>>(std::move(shape), std::move(data))) {}

template <typename T>
Tensor<T>::Tensor(Shape shape, const std::vector<T>& data)
    : impl_(std::make_shared<TensorImpl<T>>(
          std::move(shape), AlignedVec<T>(data.begin(), data.end()))) {}

template <typename T>
Tensor<T> Tensor<T>::uninit(Shape shape) {
  AlignedVec<T> data;
  data.resize(shape_numel(shape));  // construct() no-op leaves it raw
  return Tensor(std::move(shape), std::move(data));
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value) {
  return Tensor(std::move(shape), AlignedVec<T>(shape_numel(shape), value));
}

template <typename T>
Tensor<T> Tensor<T>::from(const std::vector<T>& data, Shape shape) {
  return Tensor(std::move(shape), data);
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) {
    throw std::invalid_argument("item(): tensor has shape " +
                                shape_str(shape()) + ", expected a scalar");
  }
  return impl_->data[0];
}

template <typename T>
AlignedVec<T>& Tensor<T>::grad_buf() {
  auto& g = impl_->grad;
  if (g.empty()) {
    g.assign(impl_->data.size(), T(0));
    AllocStats::add(static_cast<std::int64_t>(g.size() * sizeof(T)));
  }
  return g;
}

template <typename T>
void Tensor<T>::zero_grad() {
  auto& g = impl_->grad;
  std::fill(g.begin(), g.end(), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::clone_detached() const {
  return Tensor(impl_->shape, impl_->data);
}

template <typename T>
GradTape<T>*& GradTape<T>::active_slot() {
  thread_local GradTape<T>* slot = nullptr;
  return slot;
}

template <typename T>
GradTape<T>* GradTape<T>::active() {
  return active_slot();
}

template <typename T>
void GradTape<T>::backward(Tensor<T> loss) {
  if (loss.numel() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                shape_str(loss.shape()));
  }
  if (entries_.empty()) {
    throw std::invalid_argument("backward: tape is empty");
  }
  loss.grad_buf()[0] = T(1);
  for (std::size_t i = entries_.size(); i-- > 0;) {
    entries_[i]();
    entries_[i] = nullptr;  // release captured activations eagerly
  }
  entries_.clear();
}

template <typename T>
void fill_normal(Tensor<T>& t, RngStream& rng, double stddev, double mean) {
  for (auto& v : t.values()) v = static_cast<T>(mean + stddev * rng.normal());
}

template <typename T>
void fill_uniform(Tensor<T>& t, RngStream& rng, double lo, double hi) {
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(lo, hi));
}

template <typename T>
Tensor<T> randn(Shape shape, RngStream& rng, double stddev) {
  Tensor<T> t(std::move(shape));
  fill_normal(t, rng, stddev);
  return t;
}

template struct TensorImpl<float>;
template struct TensorImpl<double>;
template class Tensor<float>;
template class Tensor<double>;
template class GradTape<float>;
template class GradTape<double>;

template void fill_normal<float>(Tensor<float>&, RngStream&, double, double);
template void fill_normal<double>(Tensor<double>&, RngStream&, double, double);
template void fill_uniform<float>(Tensor<float>&, RngStream&, double, double);
template void fill_uniform<double>(Tensor<double>&, RngStream&, double, double);
template Tensor<float> randn<float>(Shape, RngStream&, double);
template Tensor<double> randn<double>(Shape, RngStream&, double);

}  // namespace ssmhar
