#pragma once

#include <cstddef>
#include <vector>

#include "ssmhar/tensor.hpp"

// Differentiable tensor operations. Every op is functional: it allocates its
// output, records a backward rule on the active tape when any input requires
// grad, and never mutates inputs. Broadcasting is restricted to leading batch
// dimensions: a right-hand operand may match any suffix of the left-hand
// shape and is replicated across the leading dims.
namespace ssmhar::ops {

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T>
Tensor<T> neg(const Tensor<T>& a);

template <typename T>
Tensor<T> exp(const Tensor<T>& a);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a);
template <typename T>
Tensor<T> silu(const Tensor<T>& a);
template <typename T>
Tensor<T> softplus(const Tensor<T>& a);

// a: (..., M, K); b: (K, N) shared across leading dims, or (..., K, N) with
// identical leading dims.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> transpose_last2(const Tensor<T>& a);

// Normalises along the last axis.
template <typename T>
Tensor<T> softmax(const Tensor<T>& a);

// Layer norm over the last axis with learnable per-feature scale/offset.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain,
                     const Tensor<T>& offset, T eps = T(1e-5));

// Per-(instance, channel) standardisation over the time axis of x (B, C, L)
// with learnable per-channel affine (gamma, beta), eps = 1e-5.
template <typename T>
Tensor<T> revin_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, T eps = T(1e-5));

// Mean over batch of -log softmax(logits)[label]; logits (B, C).
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels);

// Depthwise causal convolution. x: (B, L, E); kernel: (E, k); bias: (E).
// kernel[e][i] multiplies x[t - i], missing history is zero, so output[t]
// depends only on x[t-k+1 .. t].
template <typename T>
Tensor<T> causal_conv1d(const Tensor<T>& x, const Tensor<T>& kernel,
                        const Tensor<T>& bias);

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape new_shape);
template <typename T>
Tensor<T> slice(const Tensor<T>& a, std::size_t axis, std::size_t start,
                std::size_t len);
template <typename T>
Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b, std::size_t axis);
template <typename T>
Tensor<T> flip(const Tensor<T>& a, std::size_t axis);
// a: (..., 1) -> (..., n), replicating the last axis.
template <typename T>
Tensor<T> expand_last(const Tensor<T>& a, std::size_t n);

template <typename T>
Tensor<T> sum_all(const Tensor<T>& a);
template <typename T>
Tensor<T> mean_all(const Tensor<T>& a);
template <typename T>
Tensor<T> mean_axis(const Tensor<T>& a, std::size_t axis);

// Cuts sliding patches of length p with stride s from x (B, C, L).
// channel_major=true  -> (B, C*N, p)        one token per (channel, patch)
// channel_major=false -> (B, N, p*C)        patches span all channels,
//                                           flattened time-major
// N = floor((L - p) / s) + 1; trailing samples w/o a full patch are dropped.
template <typename T>
Tensor<T> patchify(const Tensor<T>& x, std::size_t p, std::size_t s,
                   bool channel_major);

}  // namespace ssmhar::ops
