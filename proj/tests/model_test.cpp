#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ssmhar/model.hpp"
#include "ssmhar/ops.hpp"

using namespace ssmhar;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.channels = 3;
  cfg.window = 16;
  cfg.patch_len = 4;
  cfg.patch_stride = 4;
  cfg.token_dim = 8;
  cfg.expand_dim = 12;
  cfg.state_dim = 4;
  cfg.layers = 2;
  cfg.classes = 4;
  cfg.conv_kernel = 3;
  return cfg;
}

}  // namespace

TEST_CASE("instance norm standardizes a hand example") {
  Tensor<double> x = Tensor<double>::from({1.0, 2.0, 3.0}, {1, 1, 3});
  Tensor<double> gamma = Tensor<double>::full({1}, 1.0);
  Tensor<double> beta({1});
  Tensor<double> y = ops::revin_norm(x, gamma, beta);
  CHECK(y.at(0) == doctest::Approx(-1.2247).epsilon(1e-3));
  CHECK(y.at(1) == doctest::Approx(0.0).scale(1.0));
  CHECK(y.at(2) == doctest::Approx(1.2247).epsilon(1e-3));
}

TEST_CASE("constant channels normalize to zero") {
  Tensor<double> x = Tensor<double>::from({5.0, 5.0, 5.0}, {1, 1, 3});
  Tensor<double> gamma = Tensor<double>::full({1}, 1.0);
  Tensor<double> beta({1});
  Tensor<double> y = ops::revin_norm(x, gamma, beta);
  for (std::size_t i = 0; i < 3; ++i) CHECK(y.at(i) == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("per-channel mean is removed before the affine stage") {
  RngStream rng(1);
  Tensor<double> x = randn<double>({2, 3, 32}, rng, 5.0);
  Tensor<double> gamma = Tensor<double>::full({3}, 1.0);
  Tensor<double> beta({3});
  Tensor<double> y = ops::revin_norm(x, gamma, beta);
  for (std::size_t r = 0; r < 6; ++r) {
    double mu = 0.0;
    for (std::size_t t = 0; t < 32; ++t) mu += y.at(r * 32 + t);
    CHECK(std::abs(mu / 32) < 1e-6);
  }
}

TEST_CASE("patch counts follow the strided formula") {
  ModelConfig cfg = tiny_config();
  cfg.window = 10;
  cfg.patch_len = 4;
  cfg.patch_stride = 2;
  CHECK(cfg.patches_per_channel() == 4);  // starts 0,2,4,6
  cfg.window = 4;
  cfg.patch_len = 4;
  CHECK(cfg.patches_per_channel() == 1);  // single full patch
  cfg.window = 512;
  cfg.patch_len = 16;
  cfg.patch_stride = 8;
  CHECK(cfg.patches_per_channel() == 63);
}

TEST_CASE("token count is channels*patches plus the class token") {
  ModelConfig cfg = tiny_config();
  cfg.channels = 3;
  cfg.window = 16;
  cfg.patch_len = 4;
  cfg.patch_stride = 4;  // N = 4 per channel
  CHECK(cfg.token_count() == 3 * 4 + 1);
  cfg.class_token = ClassTokenMode::kNone;
  CHECK(cfg.token_count() == 12);
}

TEST_CASE("zero input embeds to exactly the position table") {
  ModelConfig cfg = tiny_config();
  Model<double> m = Model<double>::init(cfg, 11);
  Tensor<double> x_norm({2, cfg.channels, cfg.window});  // zeros
  Tensor<double> tokens = m.embed_tokens(x_norm);
  REQUIRE(tokens.shape() == Shape{2, cfg.token_count(), cfg.token_dim});
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t i = 0; i < cfg.token_count() * cfg.token_dim; ++i) {
      CHECK(tokens.at(b * cfg.token_count() * cfg.token_dim + i) ==
            m.pos_embed.at(i));
    }
  }
}

TEST_CASE("identical patches differ only by their position rows") {
  ModelConfig cfg = tiny_config();
  cfg.channels = 1;
  cfg.window = 16;
  cfg.patch_len = 4;
  cfg.patch_stride = 4;
  Model<double> m = Model<double>::init(cfg, 13);
  // constant signal: every patch carries the same values
  Tensor<double> x_norm = Tensor<double>::full({1, 1, 16}, 0.37);
  Tensor<double> tokens = m.embed_tokens(x_norm);
  const std::size_t d = cfg.token_dim;
  for (std::size_t j = 1; j < 4; ++j) {
    for (std::size_t c = 0; c < d; ++c) {
      const double base = tokens.at(0 * d + c) - m.pos_embed.at(0 * d + c);
      const double other = tokens.at(j * d + c) - m.pos_embed.at(j * d + c);
      CHECK(other == doctest::Approx(base).epsilon(1e-12));
    }
  }
}

TEST_CASE("zero head weights give uniform class probabilities") {
  ModelConfig cfg = tiny_config();
  Model<double> m = Model<double>::init(cfg, 17);
  for (auto& v : m.head_w.values()) v = 0.0;
  for (auto& v : m.head_b.values()) v = 0.0;
  RngStream rng(18);
  Tensor<double> x = randn<double>({2, cfg.channels, cfg.window}, rng);
  Tensor<double> logits = m.forward(x);
  Tensor<double> probs = ops::softmax(logits);
  for (std::size_t i = 0; i < probs.numel(); ++i) {
    CHECK(probs.at(i) == doctest::Approx(1.0 / cfg.classes).epsilon(1e-9));
  }
}

TEST_CASE("argmax of the logits defines the prediction") {
  Tensor<float> logits = Tensor<float>::from({0.1f, 2.0f, -1.0f,
                                              3.0f, 0.0f, 1.0f},
                                             {2, 3});
  std::vector<int> preds = predict_labels(logits);
  CHECK(preds[0] == 1);
  CHECK(preds[1] == 0);
}

TEST_CASE("mean-pool classification works without a class token") {
  ModelConfig cfg = tiny_config();
  cfg.class_token = ClassTokenMode::kNone;
  Model<double> m = Model<double>::init(cfg, 19);
  RngStream rng(20);
  Tensor<double> x = randn<double>({3, cfg.channels, cfg.window}, rng);
  Tensor<double> logits = m.forward(x);
  CHECK(logits.shape() == Shape{3, cfg.classes});
}

TEST_CASE("uniform logits incur log C loss") {
  Tensor<double> logits({4, 6});  // zeros -> uniform
  std::vector<int> labels{0, 3, 5, 2};
  Tensor<double> loss = ops::cross_entropy(logits, labels);
  CHECK(loss.item() == doctest::Approx(std::log(6.0)).epsilon(1e-9));
}

TEST_CASE("saturated correct logits drive the loss to zero") {
  Tensor<double> logits({2, 4});
  logits.at(0 * 4 + 1) = 1e6;
  logits.at(1 * 4 + 3) = 1e6;
  std::vector<int> labels{1, 3};
  Tensor<double> loss = ops::cross_entropy(logits, labels);
  CHECK(loss.item() == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("cross entropy matches a direct high-precision sum") {
  RngStream rng(21);
  const std::size_t bsz = 16, ncls = 4;
  Tensor<double> logits = randn<double>({bsz, ncls}, rng, 2.0);
  std::vector<int> labels(bsz);
  for (auto& l : labels) l = static_cast<int>(rng.size_below(ncls));
  const double got = ops::cross_entropy(logits, labels).item();
  long double total = 0.0L;
  for (std::size_t i = 0; i < bsz; ++i) {
    long double z = 0.0L;
    for (std::size_t c = 0; c < ncls; ++c) {
      z += std::exp(static_cast<long double>(logits.at(i * ncls + c)));
    }
    total += std::log(z) - logits.at(i * ncls + labels[i]);
  }
  CHECK(got == doctest::Approx(static_cast<double>(total / bsz)).epsilon(1e-6));
}

TEST_CASE("out-of-range labels are rejected") {
  Tensor<double> logits({2, 3});
  CHECK_THROWS_AS(ops::cross_entropy(logits, {0, 3}), std::invalid_argument);
}

TEST_CASE("channel isolation: zeroing one channel moves only its tokens") {
  ModelConfig cfg = tiny_config();
  Model<double> m = Model<double>::init(cfg, 23);
  RngStream rng(24);
  Tensor<double> x = randn<double>({1, cfg.channels, cfg.window}, rng);
  Tensor<double> x2 = x.clone_detached();
  const std::size_t hit = 1;  // zero channel 1
  for (std::size_t t = 0; t < cfg.window; ++t) x2.at(hit * cfg.window + t) = 0.0;

  Tensor<double> g = Tensor<double>::full({cfg.channels}, 1.0);
  Tensor<double> b({cfg.channels});
  Tensor<double> tok1 = m.embed_tokens(ops::revin_norm(x, m.revin_gamma, m.revin_beta));
  Tensor<double> tok2 = m.embed_tokens(ops::revin_norm(x2, m.revin_gamma, m.revin_beta));
  const std::size_t n = cfg.patches_per_channel();
  const std::size_t d = cfg.token_dim;
  for (std::size_t tok = 0; tok < cfg.token_count(); ++tok) {
    const bool belongs_to_hit = tok >= hit * n && tok < (hit + 1) * n;
    bool same = true;
    for (std::size_t c = 0; c < d; ++c) {
      same = same && tok1.at(tok * d + c) == tok2.at(tok * d + c);
    }
    CHECK(same == !belongs_to_hit);
  }
}

TEST_CASE("single-channel independent and fusion modes coincide") {
  ModelConfig cfg = tiny_config();
  cfg.channels = 1;
  cfg.channel_mode = ChannelMode::kIndependent;
  Model<double> a = Model<double>::init(cfg, 29);
  cfg.channel_mode = ChannelMode::kFusion;
  Model<double> b = Model<double>::init(cfg, 29);
  RngStream rng(30);
  Tensor<double> x = randn<double>({2, 1, cfg.window}, rng);
  Tensor<double> la = a.forward(x);
  Tensor<double> lb = b.forward(x);
  for (std::size_t i = 0; i < la.numel(); ++i) CHECK(la.at(i) == lb.at(i));
}

TEST_CASE("fusion mode flattens patches across channels") {
  ModelConfig cfg = tiny_config();
  cfg.channel_mode = ChannelMode::kFusion;
  CHECK(cfg.patch_input_dim() == cfg.patch_len * cfg.channels);
  CHECK(cfg.token_count() == cfg.patches_per_channel() + 1);
  Model<double> m = Model<double>::init(cfg, 31);
  RngStream rng(32);
  Tensor<double> x = randn<double>({2, cfg.channels, cfg.window}, rng);
  Tensor<double> logits = m.forward(x);
  CHECK(logits.shape() == Shape{2, cfg.classes});
}

TEST_CASE("all-zero input yields finite deterministic logits") {
  ModelConfig cfg = tiny_config();
  Model<float> m = Model<float>::init(cfg, 33);
  Tensor<float> x({1, cfg.channels, cfg.window});
  Tensor<float> l1 = m.forward(x);
  Tensor<float> l2 = m.forward(x);
  for (std::size_t i = 0; i < l1.numel(); ++i) {
    REQUIRE(std::isfinite(l1.at(i)));
    CHECK(l1.at(i) == l2.at(i));
  }
}

TEST_CASE("permuting the batch permutes the logits identically") {
  ModelConfig cfg = tiny_config();
  Model<float> m = Model<float>::init(cfg, 37);
  RngStream rng(38);
  Tensor<float> x = randn<float>({3, cfg.channels, cfg.window}, rng);
  Tensor<float> logits = m.forward(x);
  // rotate rows 0<-1<-2<-0
  Tensor<float> xr({3, cfg.channels, cfg.window});
  const std::size_t row = cfg.channels * cfg.window;
  for (std::size_t b = 0; b < 3; ++b) {
    for (std::size_t i = 0; i < row; ++i) {
      xr.at(b * row + i) = x.at(((b + 1) % 3) * row + i);
    }
  }
  Tensor<float> lr = m.forward(xr);
  // rows are mathematically independent; allow matmul-kernel rounding that
  // depends on the row's position inside the batch
  for (std::size_t b = 0; b < 3; ++b) {
    for (std::size_t c = 0; c < cfg.classes; ++c) {
      CHECK(lr.at(b * cfg.classes + c) ==
            doctest::Approx(logits.at(((b + 1) % 3) * cfg.classes + c))
                .epsilon(1e-4));
    }
  }
}

TEST_CASE("same seed makes bit-identical models") {
  ModelConfig cfg = tiny_config();
  Model<float> a = Model<float>::init(cfg, 41);
  Model<float> b = Model<float>::init(cfg, 41);
  RngStream rng(42);
  Tensor<float> x = randn<float>({2, cfg.channels, cfg.window}, rng);
  Tensor<float> la = a.forward(x);
  Tensor<float> lb = b.forward(x);
  for (std::size_t i = 0; i < la.numel(); ++i) CHECK(la.at(i) == lb.at(i));
}

TEST_CASE("config validation reports every violation at once") {
  ModelConfig cfg = tiny_config();
  cfg.patch_len = 99;  // > window
  cfg.classes = 1;
  cfg.layers = 0;
  try {
    cfg.validate();
    FAIL("expected validation error");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("patch_len") != std::string::npos);
    CHECK(msg.find("classes") != std::string::npos);
    CHECK(msg.find("layers") != std::string::npos);
  }
}

TEST_CASE("class token participates in gradient flow") {
  ModelConfig cfg = tiny_config();
  Model<double> m = Model<double>::init(cfg, 43);
  RngStream rng(44);
  Tensor<double> x = randn<double>({2, cfg.channels, cfg.window}, rng);
  TapeScope<double> scope;
  Tensor<double> loss = ops::cross_entropy(m.forward(x), {0, 1});
  scope.tape().backward(loss);
  REQUIRE(m.class_token.has_grad());
  double norm = 0.0;
  for (double g : m.class_token.grad()) norm += g * g;
  CHECK(norm > 0.0);
}
