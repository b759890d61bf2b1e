#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ssmhar/ssm.hpp"
#include "ssmhar/tensor.hpp"

// Bidirectional selective-SSM block:
//   norm -> joint projection into (x, z) -> forward and backward
//   causal-conv + selective-scan branches -> (y_fwd + y_bwd) (.) SiLU(z)
//   -> output projection, with a residual connection around the whole block.
// The backward branch runs on the time-reversed sequence and its output is
// reversed back; the two branches have independent parameters.
namespace ssmhar {

template <typename T>
struct BlockParams {
  Tensor<T> norm_scale, norm_offset;  // (D)
  Tensor<T> w_in;                     // (D, 2E), split into x and z heads
  Tensor<T> conv_w_fwd, conv_b_fwd;   // (E,k), (E)
  Tensor<T> conv_w_bwd, conv_b_bwd;
  SSMParams<T> ssm_fwd;
  SSMParams<T> ssm_bwd;
  Tensor<T> w_out;                    // (E, D)

  std::size_t token_dim() const { return norm_scale.numel(); }
  std::size_t inner_dim() const { return w_out.dim(0); }
};

struct BlockFlags {
  bool bidirectional = true;
  bool use_conv = true;
  bool residual = true;
  bool gate_silu = true;
  ZohMode zoh = ZohMode::kSimplified;
};

// Deterministic initialisation; every parameter draws from its own named
// stream under `prefix`, so variants sharing a seed share initial values
// where shapes agree.
template <typename T>
BlockParams<T> init_block_params(std::size_t token_dim, std::size_t inner_dim,
                                 std::size_t state_size, std::size_t conv_kernel,
                                 std::uint64_t seed, const std::string& prefix);

template <typename T>
void register_block_params(BlockParams<T>& p, const std::string& prefix,
                           std::vector<std::pair<std::string, Tensor<T>*>>& out);

// Pre-residual update of the block; block_forward adds the input back.
template <typename T>
Tensor<T> block_update(const Tensor<T>& t_prev, const BlockParams<T>& p,
                       const BlockFlags& flags);

template <typename T>
Tensor<T> block_forward(const Tensor<T>& t_prev, const BlockParams<T>& p,
                        const BlockFlags& flags);

// Ablation entry points: a single forward branch, and conv replaced by
// identity. Both otherwise behave like block_forward.
template <typename T>
Tensor<T> block_forward_unidirectional(const Tensor<T>& t_prev,
                                       const BlockParams<T>& p,
                                       BlockFlags flags);
template <typename T>
Tensor<T> block_forward_no_conv(const Tensor<T>& t_prev, const BlockParams<T>& p,
                                BlockFlags flags);

extern template struct BlockParams<float>;
extern template struct BlockParams<double>;

}  // namespace ssmhar
