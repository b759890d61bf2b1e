#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ssmhar/model.hpp"

namespace ssmhar {

// Analytic forward cost per window, plus a measured tensor-allocation
// high-water mark for one forward+backward pass at batch size 1.
//
// FLOP conventions (fixed, so numbers are only comparable under the same
// rules): a multiply-add counts 2; exp/div/sqrt count 1; a matmul of
// (m,k)x(k,n) costs 2mkn; the scan path (discretize + recurrence + output
// contraction) costs 9*T*E*S per direction; a depthwise conv costs 2*T*E*k.
// The reference is a single self-attention layer at the same width run over
// the raw window (one token per sample): 8LD^2 + 4L^2D + 6L^2. That is the
// quadratic-vs-linear contrast: attending over the signal itself versus the
// patched scan pipeline.
struct CostReport {
  std::size_t window_len = 0;
  std::size_t tokens = 0;
  std::size_t param_count = 0;
  double flops_model = 0.0;
  double flops_attention = 0.0;
  std::int64_t peak_model_bytes = 0;
  std::int64_t peak_attention_bytes = 0;
};

double model_forward_flops(const ModelConfig& cfg);
double attention_forward_flops(std::size_t tokens, std::size_t dim);

// Minimal single-layer self-attention used only for the quadratic-vs-linear
// contrast; runs one forward+backward on (1, tokens, dim).
std::int64_t measure_attention_peak(std::size_t tokens, std::size_t dim,
                                    std::uint64_t seed);

CostReport cost_report_at(ModelConfig cfg, std::size_t window_len,
                          std::uint64_t seed);
std::vector<CostReport> cost_report(const ModelConfig& cfg,
                                    const std::vector<std::size_t>& lengths,
                                    std::uint64_t seed);

std::string cost_report_json(const std::vector<CostReport>& reports);

}  // namespace ssmhar
