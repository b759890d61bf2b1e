#include "ssmhar/block.hpp"

#include <cmath>
#include <stdexcept>

namespace ssmhar {

namespace {

// Fan-in-scaled uniform, the usual init for linear layers in this family of
// models. The classifier-side projections use a different (narrow normal)
// init; see model.cpp.
template <typename T>
Tensor<T> linear_init(Shape shape, std::size_t fan_in, std::uint64_t seed,
                      const std::string& name) {
  RngStream rng = stream_for(seed, name);
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor<T> t(std::move(shape));
  fill_uniform(t, rng, -bound, bound);
  return t;
}

template <typename T>
SSMParams<T> init_ssm_params(std::size_t e, std::size_t s, std::uint64_t seed,
                             const std::string& prefix) {
  SSMParams<T> p;
  // a_log = log(1..S) per channel: spreads the decay spectrum so some states
  // remember long and others short.
  p.a_log = Tensor<T>({e, s});
  for (std::size_t i = 0; i < e; ++i) {
    for (std::size_t j = 0; j < s; ++j) {
      p.a_log.data()[i * s + j] = static_cast<T>(std::log(static_cast<double>(j + 1)));
    }
  }
  p.w_b = linear_init<T>({e, s}, e, seed, prefix + ".w_b");
  p.w_c = linear_init<T>({e, s}, e, seed, prefix + ".w_c");
  p.w_delta = linear_init<T>({e, 1}, e, seed, prefix + ".w_delta");
  // bias chosen so the resting step size softplus(bias) is log-uniform in
  // [1e-3, 1e-1]
  p.delta_bias = Tensor<T>({e});
  RngStream rng = stream_for(seed, prefix + ".delta_bias");
  for (std::size_t i = 0; i < e; ++i) {
    double dt = std::exp(rng.uniform(std::log(1e-3), std::log(1e-1)));
    p.delta_bias.data()[i] = static_cast<T>(std::log(std::expm1(dt)));
  }
  return p;
}

template <typename T>
void set_rg(SSMParams<T>& p) {
  p.a_log.set_requires_grad(true);
  p.w_b.set_requires_grad(true);
  p.w_c.set_requires_grad(true);
  p.w_delta.set_requires_grad(true);
  p.delta_bias.set_requires_grad(true);
}

}  // namespace

template <typename T>
BlockParams<T> init_block_params(std::size_t token_dim, std::size_t inner_dim,
                                 std::size_t state_size, std::size_t conv_kernel,
                                 std::uint64_t seed, const std::string& prefix) {
  if (conv_kernel == 0) {
    throw std::invalid_argument("init_block_params: conv kernel must be >= 1");
  }
  BlockParams<T> p;
  p.norm_scale = Tensor<T>::full({token_dim}, T(1));
  p.norm_offset = Tensor<T>({token_dim});
  p.w_in = linear_init<T>({token_dim, 2 * inner_dim}, token_dim, seed,
                          prefix + ".w_in");
  p.conv_w_fwd = linear_init<T>({inner_dim, conv_kernel}, conv_kernel, seed,
                                prefix + ".conv_w_fwd");
  p.conv_b_fwd = Tensor<T>({inner_dim});
  p.conv_w_bwd = linear_init<T>({inner_dim, conv_kernel}, conv_kernel, seed,
                                prefix + ".conv_w_bwd");
  p.conv_b_bwd = Tensor<T>({inner_dim});
  p.ssm_fwd = init_ssm_params<T>(inner_dim, state_size, seed, prefix + ".ssm_fwd");
  p.ssm_bwd = init_ssm_params<T>(inner_dim, state_size, seed, prefix + ".ssm_bwd");
  p.w_out = linear_init<T>({inner_dim, token_dim}, inner_dim, seed,
                           prefix + ".w_out");

  p.norm_scale.set_requires_grad(true);
  p.norm_offset.set_requires_grad(true);
  p.w_in.set_requires_grad(true);
  p.conv_w_fwd.set_requires_grad(true);
  p.conv_b_fwd.set_requires_grad(true);
  p.conv_w_bwd.set_requires_grad(true);
  p.conv_b_bwd.set_requires_grad(true);
  set_rg(p.ssm_fwd);
  set_rg(p.ssm_bwd);
  p.w_out.set_requires_grad(true);
  return p;
}

template <typename T>
void register_block_params(BlockParams<T>& p, const std::string& prefix,
                           std::vector<std::pair<std::string, Tensor<T>*>>& out) {
  out.emplace_back(prefix + ".norm_scale", &p.norm_scale);
  out.emplace_back(prefix + ".norm_offset", &p.norm_offset);
  out.emplace_back(prefix + ".w_in", &p.w_in);
  out.emplace_back(prefix + ".conv_w_fwd", &p.conv_w_fwd);
  out.emplace_back(prefix + ".conv_b_fwd", &p.conv_b_fwd);
  out.emplace_back(prefix + ".conv_w_bwd", &p.conv_w_bwd);
  out.emplace_back(prefix + ".conv_b_bwd", &p.conv_b_bwd);
  auto reg_ssm = [&](SSMParams<T>& s, const std::string& sp) {
    out.emplace_back(sp + ".a_log", &s.a_log);
    out.emplace_back(sp + ".w_b", &s.w_b);
    out.emplace_back(sp + ".w_c", &s.w_c);
    out.emplace_back(sp + ".w_delta", &s.w_delta);
    out.emplace_back(sp + ".delta_bias", &s.delta_bias);
  };
  reg_ssm(p.ssm_fwd, prefix + ".ssm_fwd");
  reg_ssm(p.ssm_bwd, prefix + ".ssm_bwd");
  out.emplace_back(prefix + ".w_out", &p.w_out);
}

namespace {

// One scan branch: optional causal conv, SiLU, selection, recurrence.
template <typename T>
Tensor<T> branch(const Tensor<T>& x, const Tensor<T>& conv_w,
                 const Tensor<T>& conv_b, const SSMParams<T>& ssm,
                 const BlockFlags& flags) {
  Tensor<T> xc = flags.use_conv ? ops::causal_conv1d(x, conv_w, conv_b) : x;
  Tensor<T> xa = ops::silu(xc);
  DiscretizedParams<T> dp = select_params(xa, ssm, flags.zoh);
  return scan(dp);
}

}  // namespace

template <typename T>
Tensor<T> block_update(const Tensor<T>& t_prev, const BlockParams<T>& p,
                       const BlockFlags& flags) {
  const Shape& st = t_prev.shape();
  if (st.size() != 3 || st[2] != p.token_dim()) {
    throw std::invalid_argument("block_update: expected (B,L," +
                                std::to_string(p.token_dim()) + "), got " +
                                shape_str(st));
  }
  const std::size_t e = p.inner_dim();

  Tensor<T> normed = ops::layer_norm(t_prev, p.norm_scale, p.norm_offset);
  Tensor<T> xz = ops::matmul(normed, p.w_in);  // (B,L,2E)
  Tensor<T> x = ops::slice(xz, 2, 0, e);
  Tensor<T> z = ops::slice(xz, 2, e, e);

  Tensor<T> y = branch(x, p.conv_w_fwd, p.conv_b_fwd, p.ssm_fwd, flags);
  if (flags.bidirectional) {
    Tensor<T> x_rev = ops::flip(x, 1);
    Tensor<T> y_bwd =
        branch(x_rev, p.conv_w_bwd, p.conv_b_bwd, p.ssm_bwd, flags);
    y = ops::add(y, ops::flip(y_bwd, 1));
  }

  Tensor<T> gate = flags.gate_silu ? ops::silu(z) : z;
  return ops::matmul(ops::mul(y, gate), p.w_out);
}

template <typename T>
Tensor<T> block_forward(const Tensor<T>& t_prev, const BlockParams<T>& p,
                        const BlockFlags& flags) {
  Tensor<T> update = block_update(t_prev, p, flags);
  return flags.residual ? ops::add(update, t_prev) : update;
}

template <typename T>
Tensor<T> block_forward_unidirectional(const Tensor<T>& t_prev,
                                       const BlockParams<T>& p,
                                       BlockFlags flags) {
  flags.bidirectional = false;
  return block_forward(t_prev, p, flags);
}

template <typename T>
Tensor<T> block_forward_no_conv(const Tensor<T>& t_prev, const BlockParams<T>& p,
                                BlockFlags flags) {
  flags.use_conv = false;
  return block_forward(t_prev, p, flags);
}

template struct BlockParams<float>;
template struct BlockParams<double>;

#define SSMHAR_INSTANTIATE_BLOCK(T)                                            \
  template BlockParams<T> init_block_params(std::size_t, std::size_t,          \
                                            std::size_t, std::size_t,          \
                                            std::uint64_t, const std::string&);\
  template void register_block_params(                                         \
      BlockParams<T>&, const std::string&,                                     \
      std::vector<std::pair<std::string, Tensor<T>*>>&);                       \
  template Tensor<T> block_update(const Tensor<T>&, const BlockParams<T>&,     \
                                  const BlockFlags&);                          \
  template Tensor<T> block_forward(const Tensor<T>&, const BlockParams<T>&,    \
                                   const BlockFlags&);                         \
  template Tensor<T> block_forward_unidirectional(                             \
      const Tensor<T>&, const BlockParams<T>&, BlockFlags);                    \
  template Tensor<T> block_forward_no_conv(const Tensor<T>&,                   \
                                           const BlockParams<T>&, BlockFlags);

SSMHAR_INSTANTIATE_BLOCK(float)
SSMHAR_INSTANTIATE_BLOCK(double)

}  // namespace ssmhar
