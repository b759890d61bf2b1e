#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ssmhar/cost.hpp"

using namespace ssmhar;

namespace {

ModelConfig bench_config() {
  ModelConfig cfg;
  cfg.channels = 3;
  cfg.window = 512;
  cfg.patch_len = 16;
  cfg.patch_stride = 8;
  cfg.token_dim = 64;
  cfg.expand_dim = 128;
  cfg.state_dim = 16;
  cfg.layers = 4;
  cfg.classes = 6;
  return cfg;
}

std::size_t param_count_at_layers(std::size_t layers) {
  ModelConfig cfg = bench_config();
  cfg.window = 64;  // keep init cheap
  cfg.layers = layers;
  Model<float> m = Model<float>::init(cfg, 1);
  return m.parameter_count();
}

}  // namespace

TEST_CASE("block parameters scale exactly linearly in depth") {
  const std::size_t p1 = param_count_at_layers(1);
  const std::size_t p2 = param_count_at_layers(2);
  const std::size_t p4 = param_count_at_layers(4);
  const std::size_t per_block = p2 - p1;
  CHECK(per_block > 0);
  // doubling the layer count doubles the block share exactly
  CHECK(p4 - p2 == 2 * per_block);
  CHECK(p4 == p1 + 3 * per_block);
}

TEST_CASE("scan-path cost doubles when the window doubles") {
  ModelConfig cfg = bench_config();
  const double f512 = model_forward_flops(cfg);
  cfg.window = 1024;
  const double f1024 = model_forward_flops(cfg);
  const double ratio = f1024 / f512;
  CHECK(ratio > 1.9);
  CHECK(ratio < 2.1);
}

TEST_CASE("attention cost approaches quadratic growth at long windows") {
  ModelConfig cfg = bench_config();
  const double a1 = attention_forward_flops(512, cfg.token_dim);
  const double a2 = attention_forward_flops(1024, cfg.token_dim);
  const double ratio = a2 / a1;
  CHECK(ratio > 3.5);
  CHECK(ratio < 4.1);
}

TEST_CASE("analytic cost is strictly increasing in the window length") {
  ModelConfig cfg = bench_config();
  double prev = 0.0;
  for (std::size_t len = 128; len <= 140; ++len) {
    cfg.window = len;
    const double f = model_forward_flops(cfg);
    CHECK(f > prev);
    prev = f;
  }
}

TEST_CASE("measured peaks are positive and grow with the window") {
  ModelConfig cfg = bench_config();
  cfg.layers = 2;
  CostReport r128 = cost_report_at(cfg, 128, 3);
  CostReport r256 = cost_report_at(cfg, 256, 3);
  CHECK(r128.peak_model_bytes > 0);
  CHECK(r128.peak_attention_bytes > 0);
  CHECK(r256.peak_model_bytes > r128.peak_model_bytes);
  CHECK(r128.param_count > 0);
  CHECK(r256.param_count > r128.param_count);  // larger position table
}

TEST_CASE("report json carries one record per length") {
  ModelConfig cfg = bench_config();
  cfg.layers = 1;
  std::vector<CostReport> reports = cost_report(cfg, {64, 128}, 3);
  REQUIRE(reports.size() == 2);
  const std::string json = cost_report_json(reports);
  CHECK(json.find("\"window\": 64") != std::string::npos);
  CHECK(json.find("\"window\": 128") != std::string::npos);
  CHECK(json.find("peak_attention_bytes") != std::string::npos);
}
