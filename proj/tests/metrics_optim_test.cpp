#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ssmhar/metrics.hpp"
#include "ssmhar/optim.hpp"
#include "ssmhar/rng.hpp"

using namespace ssmhar;

namespace {

// Brute-force metrics straight from the label/prediction pairs, written
// independently of the confusion-matrix implementation.
struct BruteForce {
  double acc_std = 0.0, acc_ovr = 0.0, weighted_f1 = 0.0;
};

BruteForce brute_force_metrics(const std::vector<int>& y,
                               const std::vector<int>& yhat, int n_classes) {
  const double n = static_cast<double>(y.size());
  BruteForce out;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hits += y[i] == yhat[i];
  out.acc_std = hits / n;
  double tp_tn = 0.0;
  for (int c = 0; c < n_classes; ++c) {
    double tp = 0, fp = 0, fn = 0, tn = 0, nc = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const bool is_c = y[i] == c;
      const bool pred_c = yhat[i] == c;
      nc += is_c;
      if (is_c && pred_c) tp += 1;
      if (!is_c && pred_c) fp += 1;
      if (is_c && !pred_c) fn += 1;
      if (!is_c && !pred_c) tn += 1;
    }
    tp_tn += tp + tn;
    const double prec = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double rec = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
    out.weighted_f1 += (nc / n) * f1;
  }
  out.acc_ovr = tp_tn / (n_classes * n);
  return out;
}

std::vector<std::pair<std::string, Tensor<float>*>> single_param(
    const std::string& name, Tensor<float>& t) {
  return {{name, &t}};
}

}  // namespace

TEST_CASE("perfect predictions score one everywhere") {
  std::vector<int> y{0, 1, 2, 1, 0};
  EvalReport rep = evaluate_predictions(y, y, 3);
  CHECK(rep.accuracy == 1.0);
  CHECK(rep.accuracy_ovr == 1.0);
  CHECK(rep.weighted_f1 == 1.0);
}

TEST_CASE("hand-built confusion matrix and weighted F1") {
  std::vector<int> y{0, 0, 1, 1};
  std::vector<int> yhat{0, 1, 1, 1};
  EvalReport rep = evaluate_predictions(y, yhat, 2);
  CHECK(rep.confusion.at(0, 0) == 1);
  CHECK(rep.confusion.at(0, 1) == 1);
  CHECK(rep.confusion.at(1, 0) == 0);
  CHECK(rep.confusion.at(1, 1) == 2);
  // 0.5 * (2/3) + 0.5 * (4/5)
  CHECK(rep.weighted_f1 == doctest::Approx(0.733333333333).epsilon(1e-9));
  CHECK(rep.accuracy == doctest::Approx(0.75));
}

TEST_CASE("report matches the brute-force oracle on random pairs") {
  RngStream rng(5);
  for (int rep_i = 0; rep_i < 100; ++rep_i) {
    const int n_classes = 2 + static_cast<int>(rng.size_below(16));
    const std::size_t n = 5 + rng.size_below(60);
    std::vector<int> y(n), yhat(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<int>(rng.size_below(n_classes));
      yhat[i] = static_cast<int>(rng.size_below(n_classes));
    }
    EvalReport got = evaluate_predictions(y, yhat, n_classes);
    BruteForce want = brute_force_metrics(y, yhat, n_classes);
    CHECK(std::abs(got.accuracy - want.acc_std) < 1e-9);
    CHECK(std::abs(got.accuracy_ovr - want.acc_ovr) < 1e-9);
    CHECK(std::abs(got.weighted_f1 - want.weighted_f1) < 1e-9);
  }
}

TEST_CASE("confusion matrix conserves counts") {
  RngStream rng(7);
  const std::size_t n = 200;
  std::vector<int> y(n), yhat(n);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<int>(rng.size_below(5));
    yhat[i] = static_cast<int>(rng.size_below(5));
    hits += y[i] == yhat[i];
  }
  ConfusionMatrix cm = confusion_from_pairs(y, yhat, 5);
  CHECK(cm.total() == static_cast<std::int64_t>(n));
  CHECK(cm.trace() == static_cast<std::int64_t>(hits));
  for (std::size_t c = 0; c < 5; ++c) {
    std::int64_t row = 0;
    for (std::size_t k = 0; k < 5; ++k) row += cm.at(c, k);
    std::int64_t truth = 0;
    for (std::size_t i = 0; i < n; ++i) truth += y[i] == static_cast<int>(c);
    CHECK(row == truth);
  }
}

TEST_CASE("a class with zero precision and recall contributes zero F1") {
  // class 2 exists in truth but is never predicted correctly or at all
  std::vector<int> y{0, 1, 2, 2};
  std::vector<int> yhat{0, 1, 0, 1};
  EvalReport rep = evaluate_predictions(y, yhat, 3);
  CHECK(rep.precision[2] == 0.0);
  CHECK(rep.recall[2] == 0.0);
  BruteForce want = brute_force_metrics(y, yhat, 3);
  CHECK(rep.weighted_f1 == doctest::Approx(want.weighted_f1).epsilon(1e-12));
}

TEST_CASE("adamw leaves parameters alone with zero gradient and zero decay") {
  Tensor<float> w = Tensor<float>::from({1.f, -2.f, 3.f}, {3});
  w.set_requires_grad(true);
  w.grad_buf();  // zeros
  OptimConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.0;
  AdamW<float> opt(cfg);
  opt.step(single_param("w", w));
  CHECK(w.at(0) == 1.f);
  CHECK(w.at(1) == -2.f);
  CHECK(w.at(2) == 3.f);
}

TEST_CASE("first adamw step moves by about minus lr") {
  Tensor<float> w = Tensor<float>::from({0.f}, {1});
  w.set_requires_grad(true);
  w.grad_buf()[0] = 1.0f;
  OptimConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.0;
  AdamW<float> opt(cfg);
  opt.step(single_param("w", w));
  // bias correction makes mhat/sqrt(vhat) == 1 on the first step
  CHECK(w.at(0) == doctest::Approx(-0.1).epsilon(1e-5));
}

TEST_CASE("decay without gradients shrinks weights geometrically") {
  Tensor<float> w = Tensor<float>::from({2.f}, {1});
  w.set_requires_grad(true);
  w.grad_buf();  // zero gradient forever
  OptimConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.5;
  AdamW<float> opt(cfg);
  double expect = 2.0;
  for (int step = 0; step < 10; ++step) {
    opt.step(single_param("w", w));
    expect *= 1.0 - 0.1 * 0.5;
    CHECK(w.at(0) == doctest::Approx(expect).epsilon(1e-6));
  }
}

TEST_CASE("zero learning rate freezes parameters bit-exactly") {
  Tensor<float> w = Tensor<float>::from({0.12345f, -9.875f}, {2});
  w.set_requires_grad(true);
  auto& g = w.grad_buf();
  OptimConfig cfg;
  cfg.lr = 0.0;
  cfg.weight_decay = 0.05;
  AdamW<float> opt(cfg);
  const float w0 = w.at(0), w1 = w.at(1);
  RngStream rng(9);
  for (int step = 0; step < 20; ++step) {
    g[0] = static_cast<float>(rng.normal());
    g[1] = static_cast<float>(rng.normal());
    opt.step(single_param("w", w));
    CHECK(w.at(0) == w0);
    CHECK(w.at(1) == w1);
  }
}

TEST_CASE("non-finite gradients raise an error naming the parameter") {
  Tensor<float> w = Tensor<float>::from({1.f}, {1});
  w.set_requires_grad(true);
  w.grad_buf()[0] = std::numeric_limits<float>::quiet_NaN();
  AdamW<float> opt(OptimConfig{});
  CHECK_THROWS_WITH_AS(opt.step(single_param("embed.w", w)),
                       doctest::Contains("embed.w"), std::runtime_error);
}

TEST_CASE("adamw with zero decay matches an independent adam") {
  // hand-rolled Adam, written against the original update equations; same
  // storage policy (f32 state, f64 arithmetic) so rounding does not drift
  OptimConfig cfg;
  cfg.lr = 1e-3;
  cfg.weight_decay = 0.0;
  Tensor<float> w = Tensor<float>::from({0.5f, -0.25f, 1.5f}, {3});
  w.set_requires_grad(true);
  auto& g = w.grad_buf();
  AdamW<float> opt(cfg);

  std::vector<float> ref{0.5f, -0.25f, 1.5f};
  std::vector<float> m(3, 0.0f), v(3, 0.0f);
  RngStream rng(11);
  for (int step = 1; step <= 50; ++step) {
    std::vector<double> grads(3);
    for (int i = 0; i < 3; ++i) {
      grads[i] = rng.normal();
      g[i] = static_cast<float>(grads[i]);
    }
    opt.step(single_param("w", w));
    for (int i = 0; i < 3; ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = 0.9 * m[i] + 0.1 * gi;
      const double vi = 0.999 * v[i] + 0.001 * gi * gi;
      const double mhat = mi / (1.0 - std::pow(0.9, step));
      const double vhat = vi / (1.0 - std::pow(0.999, step));
      ref[i] = static_cast<float>(ref[i] - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      CHECK(std::abs(w.at(i) - ref[i]) < 1e-7);
    }
  }
}

TEST_CASE("confusion csv renders a plain grid") {
  ConfusionMatrix cm(2);
  cm.at(0, 0) = 3;
  cm.at(0, 1) = 1;
  cm.at(1, 1) = 2;
  CHECK(cm.to_csv() == "3,1\n0,2\n");
}
