#include "ssmhar/cost.hpp"

#include <cmath>
#include <sstream>

#include "ssmhar/ops.hpp"

namespace ssmhar {

double model_forward_flops(const ModelConfig& cfg) {
  const double dc = static_cast<double>(cfg.channels);
  const double len = static_cast<double>(cfg.window);
  const double d = static_cast<double>(cfg.token_dim);
  const double e = static_cast<double>(cfg.expand_dim);
  const double s = static_cast<double>(cfg.state_dim);
  const double k = static_cast<double>(cfg.conv_kernel);
  const double c = static_cast<double>(cfg.classes);
  const double pdim = static_cast<double>(cfg.patch_input_dim());
  const double np = static_cast<double>(cfg.patch_tokens());
  const double t = static_cast<double>(cfg.token_count());

  double flops = 0.0;
  flops += 7.0 * dc * len;             // instance norm over raw samples
  flops += 2.0 * np * pdim * d + np * d;  // patch embedding + bias
  flops += t * d;                      // position add

  const double dirs = cfg.bidirectional ? 2.0 : 1.0;
  double per_block = 0.0;
  per_block += 8.0 * t * d;            // pre-norm
  per_block += 2.0 * t * d * 2.0 * e;  // joint (x,z) projection
  double per_dir = 0.0;
  if (cfg.use_conv) per_dir += 2.0 * t * e * k + t * e;
  per_dir += 4.0 * t * e;              // SiLU on the scan input
  per_dir += 2.0 * 2.0 * t * e * s;    // B and C selection
  per_dir += 2.0 * t * e + 5.0 * t * e;  // step-size selection + softplus
  per_dir += 9.0 * t * e * s;          // discretize + recurrence + output
  per_block += dirs * per_dir;
  per_block += 5.0 * t * e;            // gate
  per_block += 2.0 * t * e * d;        // output projection
  per_block += t * d;                  // residual
  flops += static_cast<double>(cfg.layers) * per_block;

  flops += 8.0 * d + 2.0 * d * c + c;  // head norm + linear
  if (cfg.class_token == ClassTokenMode::kNone) flops += t * d;  // mean pool
  return flops;
}

double attention_forward_flops(std::size_t tokens, std::size_t dim) {
  const double t = static_cast<double>(tokens);
  const double d = static_cast<double>(dim);
  return 8.0 * t * d * d + 4.0 * t * t * d + 6.0 * t * t;
}

std::int64_t measure_attention_peak(std::size_t tokens, std::size_t dim,
                                    std::uint64_t seed) {
  RngStream rng = stream_for(seed, "bench/attention");
  using T = float;
  Tensor<T> wq = randn<T>({dim, dim}, rng, 0.05);
  Tensor<T> wk = randn<T>({dim, dim}, rng, 0.05);
  Tensor<T> wv = randn<T>({dim, dim}, rng, 0.05);
  Tensor<T> wo = randn<T>({dim, dim}, rng, 0.05);
  for (auto* w : {&wq, &wk, &wv, &wo}) w->set_requires_grad(true);
  Tensor<T> x = randn<T>({1, tokens, dim}, rng);

  AllocStats::reset_peak();
  const std::int64_t before = AllocStats::peak_bytes();
  {
    TapeScope<T> scope;
    Tensor<T> q = ops::matmul(x, wq);
    Tensor<T> k = ops::matmul(x, wk);
    Tensor<T> v = ops::matmul(x, wv);
    Tensor<T> scores = ops::scale(ops::matmul(q, ops::transpose_last2(k)),
                                  static_cast<T>(1.0 / std::sqrt(double(dim))));
    Tensor<T> probs = ops::softmax(scores);
    Tensor<T> ctx = ops::matmul(probs, v);
    Tensor<T> out = ops::matmul(ctx, wo);
    Tensor<T> loss = ops::mean_all(out);
    scope.tape().backward(loss);
  }
  return AllocStats::peak_bytes() - before;
}

CostReport cost_report_at(ModelConfig cfg, std::size_t window_len,
                          std::uint64_t seed) {
  cfg.window = window_len;
  cfg.validate();
  CostReport rep;
  rep.window_len = window_len;
  rep.tokens = cfg.token_count();
  rep.flops_model = model_forward_flops(cfg);
  rep.flops_attention = attention_forward_flops(window_len, cfg.token_dim);

  using T = float;
  Model<T> model = Model<T>::init(cfg, seed);
  rep.param_count = model.parameter_count();
  RngStream rng = stream_for(seed, "bench/input");
  Tensor<T> x = randn<T>({1, cfg.channels, cfg.window}, rng);
  AllocStats::reset_peak();
  const std::int64_t before = AllocStats::peak_bytes();
  {
    TapeScope<T> scope;
    Tensor<T> logits = model.forward(x);
    Tensor<T> loss = ops::mean_all(logits);
    scope.tape().backward(loss);
  }
  rep.peak_model_bytes = AllocStats::peak_bytes() - before;
  model.zero_grad();

  rep.peak_attention_bytes =
      measure_attention_peak(window_len, cfg.token_dim, seed);
  return rep;
}

std::vector<CostReport> cost_report(const ModelConfig& cfg,
                                    const std::vector<std::size_t>& lengths,
                                    std::uint64_t seed) {
  std::vector<CostReport> out;
  for (std::size_t len : lengths) out.push_back(cost_report_at(cfg, len, seed));
  return out;
}

std::string cost_report_json(const std::vector<CostReport>& reports) {
  std::ostringstream os;
  os << "[\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const CostReport& r = reports[i];
    os << "  {\"window\": " << r.window_len << ", \"tokens\": " << r.tokens
       << ", \"params\": " << r.param_count << ", \"flops_model\": "
       << static_cast<std::int64_t>(r.flops_model) << ", \"flops_attention\": "
       << static_cast<std::int64_t>(r.flops_attention)
       << ", \"peak_model_bytes\": " << r.peak_model_bytes
       << ", \"peak_attention_bytes\": " << r.peak_attention_bytes << "}"
       << (i + 1 < reports.size() ? "," : "") << "\n";
  }
  os << "]\n";
  return os.str();
}

}  // namespace ssmhar
