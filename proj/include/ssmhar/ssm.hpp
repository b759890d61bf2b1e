#pragma once

#include <utility>

#include "ssmhar/ops.hpp"
#include "ssmhar/tensor.hpp"

// Selective state-space core: continuous parameters, zero-order-hold
// discretization, the input-dependent sequential scan, an LTI convolution
// route used for cross-verification, and an associative parallel scan.
//
// The state matrix A is diagonal with strictly negative entries,
// parameterised as A = -exp(a_log), so exp(delta*A) stays in (0,1) for any
// positive step size and the recurrence is unconditionally stable.
namespace ssmhar {

enum class ZohMode {
  kSimplified,  // b_bar = delta * b (training default)
  kExact,       // b_bar = (exp(delta*a) - 1) / a * b
};

// Per-block selective parameters. Width E channels, state size S.
template <typename T>
struct SSMParams {
  Tensor<T> a_log;       // (E,S)
  Tensor<T> w_b;         // (E,S)  input -> B projection
  Tensor<T> w_c;         // (E,S)  input -> C projection
  Tensor<T> w_delta;     // (E,1)  input -> scalar step, broadcast over E
  Tensor<T> delta_bias;  // (E)    softplus(bias) sets the resting step size

  std::size_t channels() const { return a_log.dim(0); }
  std::size_t state_size() const { return a_log.dim(1); }
};

// Per-timestep discrete parameters; the input is already folded into the
// b term, so the scan needs nothing else.
template <typename T>
struct DiscretizedParams {
  Tensor<T> a_bar;    // (B,L,E,S), entries in (0,1)
  Tensor<T> b_bar_x;  // (B,L,E,S)
  Tensor<T> c;        // (B,L,S)
};

// Elementwise ZOH over same-shape tensors (verification utility, not
// recorded on any tape). Requires delta > 0 everywhere.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> zoh_discretize(const Tensor<T>& a,
                                               const Tensor<T>& b,
                                               const Tensor<T>& delta,
                                               ZohMode mode);

// Differentiable discretization pieces used by select_params.
// discretize_a: out[b,l,e,s] = exp(delta[b,l,e] * a[e,s]); delta must be > 0.
template <typename T>
Tensor<T> discretize_a(const Tensor<T>& delta, const Tensor<T>& a);
// out[b,l,e,s] = delta[b,l,e] * bsel[b,l,s] * x[b,l,e]
template <typename T>
Tensor<T> input_term_simplified(const Tensor<T>& delta, const Tensor<T>& bsel,
                                const Tensor<T>& x);
// out[b,l,e,s] = (a_bar[b,l,e,s] - 1) / a[e,s] * bsel[b,l,s] * x[b,l,e]
template <typename T>
Tensor<T> input_term_exact(const Tensor<T>& a_bar, const Tensor<T>& a,
                           const Tensor<T>& bsel, const Tensor<T>& x);

// The selection mechanism: B, C and the step size delta are pointwise
// functions of the input sequence x (B,L,E), then ZOH-discretized per
// timestep. delta = softplus(x . w_delta + bias) > 0.
template <typename T>
DiscretizedParams<T> select_params(const Tensor<T>& x, const SSMParams<T>& p,
                                   ZohMode mode = ZohMode::kSimplified);

// Sequential linear recurrence h_t = a_bar_t (.) h_{t-1} + b_bar_x_t with
// h_0 = 0 and output y[b,t,e] = sum_s c[b,t,s] * h_t[e,s]. Differentiable.
template <typename T>
Tensor<T> scan(const DiscretizedParams<T>& dp);

// Same recurrence evaluated as a deterministic associative prefix scan over
// pairs (a, u) with (a2,u2)*(a1,u1) = (a1*a2, a2*u1 + u2). Forward only;
// agrees with scan() to within accumulation rounding.
template <typename T>
Tensor<T> scan_parallel(const DiscretizedParams<T>& dp);

// Time-invariant convolution route: materialises the kernel
// K[t] = c . a_bar^t b_bar and evaluates y = x * K causally. a_bar/b_bar may
// be (E,S) or (L,E,S); c may be (S) or (L,S). A time axis whose entries vary
// is an error: this route is only valid for LTI parameters.
template <typename T>
Tensor<T> scan_conv_lti(const Tensor<T>& a_bar, const Tensor<T>& b_bar,
                        const Tensor<T>& c, const Tensor<T>& x);

extern template struct SSMParams<float>;
extern template struct SSMParams<double>;
extern template struct DiscretizedParams<float>;
extern template struct DiscretizedParams<double>;

}  // namespace ssmhar
