#include "ssmhar/gradcheck.hpp"

#include <cmath>
#include <functional>

#include "ssmhar/block.hpp"
#include "ssmhar/model.hpp"
#include "ssmhar/ops.hpp"
#include "ssmhar/ssm.hpp"

namespace ssmhar {

namespace {

using D = double;
using Fn = std::function<Tensor<D>(const std::vector<Tensor<D>>&)>;

constexpr double kAbsFloor = 1e-8;

// One probe: analytic gradients for every input vs central differences.
double probe_max_rel_err(const Fn& f, std::vector<Tensor<D>> inputs,
                         RngStream& rng, double eps) {
  Tensor<D> weights;
  {
    TapeScope<D> scope;
    for (auto& t : inputs) t.set_requires_grad(true);
    Tensor<D> out = f(inputs);
    weights = randn<D>(out.shape(), rng);
    Tensor<D> loss = ops::sum_all(ops::mul(out, weights));
    scope.tape().backward(loss);
  }
  auto loss_at = [&]() {
    Tensor<D> out = f(inputs);  // no active tape: pure forward
    double acc = 0.0;
    for (std::size_t i = 0; i < out.numel(); ++i) {
      acc += out.data()[i] * weights.data()[i];
    }
    return acc;
  };
  double worst = 0.0;
  for (auto& t : inputs) {
    std::vector<D> analytic(t.numel(), 0.0);
    if (t.has_grad()) analytic.assign(t.grad().begin(), t.grad().end());
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const D saved = t.data()[i];
      t.data()[i] = saved + eps;
      const double lp = loss_at();
      t.data()[i] = saved - eps;
      const double lm = loss_at();
      t.data()[i] = saved;
      const double fd = (lp - lm) / (2.0 * eps);
      const double diff = std::abs(analytic[i] - fd);
      if (diff < kAbsFloor) continue;
      const double denom = std::max(std::abs(analytic[i]), std::abs(fd));
      worst = std::max(worst, diff / denom);
    }
  }
  return worst;
}

struct Case {
  std::string name;
  // builds fresh random inputs and the function under test
  std::function<std::pair<std::vector<Tensor<D>>, Fn>(RngStream&)> build;
};

Tensor<D> rand_pos(Shape shape, RngStream& rng, double lo, double hi) {
  Tensor<D> t(std::move(shape));
  fill_uniform(t, rng, lo, hi);
  return t;
}

std::vector<Case> build_cases(std::uint64_t seed) {
  std::vector<Case> cases;

  cases.push_back({"add", [](RngStream& rng) {
    std::vector<Tensor<D>> in{randn<D>({2, 3, 4}, rng), randn<D>({4}, rng)};
    Fn f = [](const std::vector<Tensor<D>>& v) { return ops::add(v[0], v[1]); };
    return std::make_pair(in, f);
  }});
  cases.push_back({"mul", [](RngStream& rng) {
    std::vector<Tensor<D>> in{randn<D>({2, 3, 4}, rng), randn<D>({3, 4}, rng)};
    Fn f = [](const std::vector<Tensor<D>>& v) { return ops::mul(v[0], v[1]); };
    return std::make_pair(in, f);
  }});
  cases.push_back({"matmul", [](RngStream& rng) {
    std::vector<Tensor<D>> in{randn<D>({2, 3, 4}, rng), randn<D>({4, 5}, rng)};
    Fn f = [](const std::vector<Tensor<D>>& v) { return ops::matmul(v[0], v[1]); };
    return std::make_pair(in, f);
  }});
  cases.push_back({"matmul_batched", [](RngStream& rng) {
    std::vector<Tensor<D>> in{randn<D>({2, 3, 4}, rng), randn<D>({2, 4, 5}, rng)};
    Fn f = [](const std::vector<Tensor<D>>& v) {
      return ops::matmul(v[0], ops::transpose_last2(ops::transpose_last2(v[1])));
    };
    return std::make_pair(in, f);
  }});
  cases.push_back({"exp", [](RngStream& rng) {
    std::vector<Tensor<D>> in{randn<D>({3, 5}, rng, 0.5)};
    Fn f = [](const std::vector<Tensor<D>>& v) { return ops::exp(v[0]); };
    return std::make_pair(in, f);
  }});
  cases.push_back({"sigmoid", [](RngStream& rng) {
    std::vector<Tensor<D>> in{randn<D>({3, 5}, rng)};
    Fn f = [](const std::vector<Tensor<D>>& v) { return ops::sigmoid(v[0]); };
    return std::make_pair(in, f);
  }});
  cases.push_back({"silu", [](RngStream& rng) {
    std::vector<Tensor<D>> in{randn<D>({3, 5}, rng)};
    Fn f = [](const std::vector<Tensor<D>>& v) { return ops::silu(v[0]); };
    return std::make_pair(in, f);
  }});
  cases.push_back({"softplus", [](RngStream& rng) {
    std::vector<Tensor<D>> in{randn<D>({3, 5}, rng)};
    Fn f = [](const std::vector<Tensor<D>>& v) { return ops::softplus(v[0]); };
    return std::make_pair(in, f);
  }});
  cases.push_back({"softmax", [](RngStream& rng) {
    std::vector<Tensor<D>> in{randn<D>({4, 7}, rng)};
    Fn f = [](const std::vector<Tensor<D>>& v) { return ops::softmax(v[0]); };
    return std::make_pair(in, f);
  }});
  cases.push_back({"layer_norm", [](RngStream& rng) {
    std::vector<Tensor<D>> in{randn<D>({5, 8}, rng), randn<D>({8}, rng),
                              randn<D>({8}, rng)};
    Fn f = [](const std::vector<Tensor<D>>& v) {
      return ops::layer_norm(v[0], v[1], v[2]);
    };
    return std::make_pair(in, f);
  }});
  cases.push_back({"revin", [](RngStream& rng) {
    std::vector<Tensor<D>> in{randn<D>({2, 3, 12}, rng), randn<D>({3}, rng),
                              randn<D>({3}, rng)};
    Fn f = [](const std::vector<Tensor<D>>& v) {
      return ops::revin_norm(v[0], v[1], v[2]);
    };
    return std::make_pair(in, f);
  }});
  cases.push_back({"cross_entropy", [](RngStream& rng) {
    std::vector<Tensor<D>> in{randn<D>({6, 5}, rng)};
    std::vector<int> labels(6);
    for (auto& l : labels) l = static_cast<int>(rng.size_below(5));
    Fn f = [labels](const std::vector<Tensor<D>>& v) {
      return ops::cross_entropy(v[0], labels);
    };
    return std::make_pair(in, f);
  }});
  cases.push_back({"causal_conv1d", [](RngStream& rng) {
    std::vector<Tensor<D>> in{randn<D>({2, 9, 3}, rng), randn<D>({3, 4}, rng),
                              randn<D>({3}, rng)};
    Fn f = [](const std::vector<Tensor<D>>& v) {
      return ops::causal_conv1d(v[0], v[1], v[2]);
    };
    return std::make_pair(in, f);
  }});
  cases.push_back({"patchify", [](RngStream& rng) {
    std::vector<Tensor<D>> in{randn<D>({2, 3, 10}, rng)};
    Fn f = [](const std::vector<Tensor<D>>& v) {
      return ops::patchify(v[0], 4, 2, true);
    };
    return std::make_pair(in, f);
  }});
  cases.push_back({"shape_ops", [](RngStream& rng) {
    std::vector<Tensor<D>> in{randn<D>({2, 6, 4}, rng)};
    Fn f = [](const std::vector<Tensor<D>>& v) {
      Tensor<D> s = ops::slice(v[0], 1, 1, 4);
      Tensor<D> fl = ops::flip(s, 1);
      Tensor<D> cc = ops::concat(fl, s, 2);
      return ops::mean_axis(cc, 1);
    };
    return std::make_pair(in, f);
  }});
  cases.push_back({"expand_last", [](RngStream& rng) {
    std::vector<Tensor<D>> in{randn<D>({2, 5, 1}, rng)};
    Fn f = [](const std::vector<Tensor<D>>& v) { return ops::expand_last(v[0], 6); };
    return std::make_pair(in, f);
  }});
  cases.push_back({"discretize_a", [](RngStream& rng) {
    std::vector<Tensor<D>> in{rand_pos({2, 5, 3}, rng, 0.05, 1.0),
                              rand_pos({3, 4}, rng, -2.0, -0.1)};
    Fn f = [](const std::vector<Tensor<D>>& v) {
      return discretize_a(v[0], v[1]);
    };
    return std::make_pair(in, f);
  }});
  cases.push_back({"input_term_simplified", [](RngStream& rng) {
    std::vector<Tensor<D>> in{rand_pos({2, 5, 3}, rng, 0.05, 1.0),
                              randn<D>({2, 5, 4}, rng), randn<D>({2, 5, 3}, rng)};
    Fn f = [](const std::vector<Tensor<D>>& v) {
      return input_term_simplified(v[0], v[1], v[2]);
    };
    return std::make_pair(in, f);
  }});
  cases.push_back({"input_term_exact", [](RngStream& rng) {
    std::vector<Tensor<D>> in{rand_pos({2, 5, 3, 4}, rng, 0.1, 0.95),
                              rand_pos({3, 4}, rng, -2.0, -0.2),
                              randn<D>({2, 5, 4}, rng), randn<D>({2, 5, 3}, rng)};
    Fn f = [](const std::vector<Tensor<D>>& v) {
      return input_term_exact(v[0], v[1], v[2], v[3]);
    };
    return std::make_pair(in, f);
  }});
  cases.push_back({"scan", [](RngStream& rng) {
    std::vector<Tensor<D>> in{rand_pos({2, 6, 3, 4}, rng, 0.05, 0.95),
                              randn<D>({2, 6, 3, 4}, rng),
                              randn<D>({2, 6, 4}, rng)};
    Fn f = [](const std::vector<Tensor<D>>& v) {
      return scan(DiscretizedParams<D>{v[0], v[1], v[2]});
    };
    return std::make_pair(in, f);
  }});
  // the full selection mechanism in both discretization modes
  for (ZohMode mode : {ZohMode::kSimplified, ZohMode::kExact}) {
    const std::string name = mode == ZohMode::kSimplified
                                 ? "select_scan_simplified"
                                 : "select_scan_exact";
    cases.push_back({name, [mode](RngStream& rng) {
      const std::size_t e = 3, s = 4;
      std::vector<Tensor<D>> in{
          randn<D>({2, 6, e}, rng),      // x
          randn<D>({e, s}, rng, 0.5),    // a_log
          randn<D>({e, s}, rng, 0.4),    // w_b
          randn<D>({e, s}, rng, 0.4),    // w_c
          randn<D>({e, 1}, rng, 0.4),    // w_delta
          randn<D>({e}, rng, 0.5),       // delta_bias
      };
      Fn f = [mode](const std::vector<Tensor<D>>& v) {
        SSMParams<D> p{v[1], v[2], v[3], v[4], v[5]};
        return scan(select_params(v[0], p, mode));
      };
      return std::make_pair(in, f);
    }});
  }
  // complete block, both directionality variants
  for (bool bidir : {true, false}) {
    const std::string name = bidir ? "block_bidirectional" : "block_unidirectional";
    cases.push_back({name, [bidir, seed](RngStream& rng) {
      const std::size_t d = 5, e = 4, s = 3, k = 3;
      BlockParams<D> p = init_block_params<D>(d, e, s, k, seed ^ rng.next_u64(),
                                              "gradcheck");
      std::vector<Tensor<D>> in;
      in.push_back(randn<D>({2, 5, d}, rng));
      std::vector<std::pair<std::string, Tensor<D>*>> reg;
      register_block_params(p, "b", reg);
      for (auto& [n2, t] : reg) in.push_back(*t);
      Fn f = [p, bidir](const std::vector<Tensor<D>>& v) {
        BlockFlags flags;
        flags.bidirectional = bidir;
        return block_forward(v[0], p, flags);
      };
      return std::make_pair(in, f);
    }});
  }
  cases.push_back({"head", [seed](RngStream& rng) {
    ModelConfig cfg;
    cfg.channels = 2;
    cfg.window = 12;
    cfg.patch_len = 4;
    cfg.patch_stride = 2;
    cfg.token_dim = 5;
    cfg.expand_dim = 6;
    cfg.state_dim = 3;
    cfg.layers = 1;
    cfg.classes = 3;
    cfg.conv_kernel = 2;
    auto model = std::make_shared<Model<D>>(
        Model<D>::init(cfg, seed ^ rng.next_u64()));
    std::vector<Tensor<D>> in{randn<D>({2, cfg.token_count(), 5}, rng),
                              model->head_norm_scale, model->head_norm_offset,
                              model->head_w, model->head_b};
    Fn f = [model](const std::vector<Tensor<D>>& v) {
      return model->classify(v[0]);
    };
    return std::make_pair(in, f);
  }});
  cases.push_back({"model_loss", [seed](RngStream& rng) {
    ModelConfig cfg;
    cfg.channels = 2;
    cfg.window = 12;
    cfg.patch_len = 4;
    cfg.patch_stride = 2;
    cfg.token_dim = 5;
    cfg.expand_dim = 6;
    cfg.state_dim = 3;
    cfg.layers = 1;
    cfg.classes = 3;
    cfg.conv_kernel = 2;
    auto model = std::make_shared<Model<D>>(
        Model<D>::init(cfg, seed ^ rng.next_u64()));
    std::vector<int> labels{0, 2};
    std::vector<Tensor<D>> in;
    in.push_back(randn<D>({2, 2, 12}, rng));
    for (auto& [n2, t] : model->parameters()) in.push_back(*t);
    Fn f = [model, labels](const std::vector<Tensor<D>>& v) {
      return ops::cross_entropy(model->forward(v[0]), labels);
    };
    return std::make_pair(in, f);
  }});
  return cases;
}

}  // namespace

std::vector<GradCheckResult> run_gradcheck_suite(std::size_t probes, double eps,
                                                 double tol, std::uint64_t seed) {
  const bool saved_checks = debug_finite_checks();
  set_debug_finite_checks(false);  // perturbed re-evals dominate; skip sweeps
  std::vector<GradCheckResult> out;
  for (const auto& c : build_cases(seed)) {
    GradCheckResult r;
    r.op = c.name;
    r.probes = probes;
    for (std::size_t p = 0; p < probes; ++p) {
      RngStream rng =
          stream_for(seed, "gradcheck/" + c.name + "/" + std::to_string(p));
      auto [inputs, f] = c.build(rng);
      r.max_rel_err = std::max(r.max_rel_err,
                               probe_max_rel_err(f, std::move(inputs), rng, eps));
    }
    r.pass = r.max_rel_err < tol;
    out.push_back(std::move(r));
  }
  set_debug_finite_checks(saved_checks);
  return out;
}

}  // namespace ssmhar
