#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ssmhar/ops.hpp"
#include "ssmhar/tensor.hpp"

using namespace ssmhar;

namespace {

struct FiniteCheckGuard {
  FiniteCheckGuard() { set_debug_finite_checks(true); }
  ~FiniteCheckGuard() { set_debug_finite_checks(false); }
};

template <typename T>
Tensor<T> t1(std::vector<T> v) {
  Shape s{v.size()};
  return Tensor<T>::from(std::move(v), s);
}

}  // namespace

TEST_CASE("softmax of equal entries is uniform") {
  FiniteCheckGuard guard;
  Tensor<float> x = t1<float>({0.f, 0.f, 0.f});
  Tensor<float> y = ops::softmax(x);
  for (std::size_t i = 0; i < 3; ++i) CHECK(y.at(i) == doctest::Approx(1.0f / 3));
}

TEST_CASE("softmax rows sum to one with entries in (0,1)") {
  RngStream rng(11);
  Tensor<double> x = randn<double>({5, 9}, rng, 3.0);
  Tensor<double> y = ops::softmax(x);
  for (std::size_t r = 0; r < 5; ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < 9; ++c) {
      const double v = y.at(r * 9 + c);
      CHECK(v > 0.0);
      CHECK(v < 1.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("silu at zero is zero") {
  Tensor<float> y = ops::silu(t1<float>({0.f}));
  CHECK(y.at(0) == 0.0f);
}

TEST_CASE("matmul by identity is the identity") {
  RngStream rng(3);
  Tensor<float> m = randn<float>({3, 3}, rng);
  Tensor<float> eye({3, 3});
  for (int i = 0; i < 3; ++i) eye.at(i * 3 + i) = 1.0f;
  Tensor<float> y = ops::matmul(eye, m);
  for (std::size_t i = 0; i < 9; ++i) CHECK(y.at(i) == doctest::Approx(m.at(i)));
}

TEST_CASE("matmul shape mismatch names the op and shapes") {
  Tensor<float> a({2, 3});
  Tensor<float> b({4, 2});
  CHECK_THROWS_WITH_AS(ops::matmul(a, b),
                       doctest::Contains("matmul"), std::invalid_argument);
  try {
    ops::matmul(a, b);
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("(2,3)") != std::string::npos);
    CHECK(std::string(e.what()).find("(4,2)") != std::string::npos);
  }
}

TEST_CASE("backward of sum of squares doubles the input") {
  Tensor<double> w = t1<double>({1.0, 2.0});
  w.set_requires_grad(true);
  TapeScope<double> scope;
  Tensor<double> loss = ops::sum_all(ops::mul(w, w));
  scope.tape().backward(loss);
  CHECK(w.grad()[0] == doctest::Approx(2.0));
  CHECK(w.grad()[1] == doctest::Approx(4.0));
}

TEST_CASE("silu gradient at zero is one half") {
  Tensor<double> w = t1<double>({0.0});
  w.set_requires_grad(true);
  TapeScope<double> scope;
  Tensor<double> loss = ops::sum_all(ops::silu(w));
  scope.tape().backward(loss);
  CHECK(w.grad()[0] == doctest::Approx(0.5));
}

TEST_CASE("composite chain gradient matches central finite differences") {
  RngStream rng(17);
  Tensor<double> w = randn<double>({4, 3}, rng);
  Tensor<double> m = randn<double>({3, 5}, rng);
  auto loss_value = [&]() {
    Tensor<double> h = ops::silu(ops::matmul(w, m));
    Tensor<double> s = ops::softmax(h);
    return ops::sum_all(ops::mul(s, s)).item();
  };
  w.set_requires_grad(true);
  {
    TapeScope<double> scope;
    Tensor<double> h = ops::silu(ops::matmul(w, m));
    Tensor<double> s = ops::softmax(h);
    scope.tape().backward(ops::sum_all(ops::mul(s, s)));
  }
  const double eps = 1e-4;
  for (std::size_t i = 0; i < w.numel(); ++i) {
    const double saved = w.at(i);
    w.at(i) = saved + eps;
    const double lp = loss_value();
    w.at(i) = saved - eps;
    const double lm = loss_value();
    w.at(i) = saved;
    const double fd = (lp - lm) / (2 * eps);
    const double an = w.grad()[i];
    const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-10});
    CHECK(rel < 1e-3);
  }
}

TEST_CASE("non-scalar loss is rejected") {
  Tensor<float> w = t1<float>({1.f, 2.f});
  w.set_requires_grad(true);
  TapeScope<float> scope;
  Tensor<float> y = ops::mul(w, w);
  CHECK_THROWS_AS(scope.tape().backward(y), std::invalid_argument);
}

TEST_CASE("causal conv with unit kernel is the identity") {
  RngStream rng(5);
  Tensor<float> x = randn<float>({2, 6, 3}, rng);
  Tensor<float> kernel = Tensor<float>::full({3, 1}, 1.0f);
  Tensor<float> bias({3});
  Tensor<float> y = ops::causal_conv1d(x, kernel, bias);
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y.at(i) == x.at(i));
}

TEST_CASE("causal conv [0,1] kernel delays by one step") {
  Tensor<float> x = Tensor<float>::from({1.f, 0.f, 0.f, 0.f}, {1, 4, 1});
  Tensor<float> kernel = Tensor<float>::from({0.f, 1.f}, {1, 2});
  Tensor<float> bias({1});
  Tensor<float> y = ops::causal_conv1d(x, kernel, bias);
  CHECK(y.at(0) == 0.0f);
  CHECK(y.at(1) == 1.0f);
  CHECK(y.at(2) == 0.0f);
  CHECK(y.at(3) == 0.0f);
}

TEST_CASE("causal conv hand example with zero left pad") {
  Tensor<float> x = Tensor<float>::from({1.f, 1.f, 1.f}, {1, 3, 1});
  Tensor<float> kernel = Tensor<float>::from({1.f, 1.f}, {1, 2});
  Tensor<float> bias({1});
  Tensor<float> y = ops::causal_conv1d(x, kernel, bias);
  CHECK(y.at(0) == 1.0f);
  CHECK(y.at(1) == 2.0f);
  CHECK(y.at(2) == 2.0f);
}

TEST_CASE("causal conv output ignores future inputs") {
  RngStream rng(23);
  Tensor<float> x = randn<float>({1, 8, 2}, rng);
  Tensor<float> kernel = randn<float>({2, 4}, rng);
  Tensor<float> bias = randn<float>({2}, rng);
  Tensor<float> y1 = ops::causal_conv1d(x, kernel, bias);
  // change the tail; outputs before it must not move
  Tensor<float> x2 = x.clone_detached();
  for (std::size_t e = 0; e < 2; ++e) x2.at((8 - 1) * 2 + e) += 5.0f;
  for (std::size_t e = 0; e < 2; ++e) x2.at((8 - 2) * 2 + e) -= 3.0f;
  Tensor<float> y2 = ops::causal_conv1d(x2, kernel, bias);
  for (std::size_t t = 0; t < 6; ++t) {
    for (std::size_t e = 0; e < 2; ++e) {
      CHECK(y1.at(t * 2 + e) == y2.at(t * 2 + e));
    }
  }
}

TEST_CASE("conv kernel wider than the sequence only sees the pad") {
  Tensor<float> x = Tensor<float>::from({2.f, 3.f}, {1, 2, 1});
  Tensor<float> kernel = Tensor<float>::from({1.f, 1.f, 1.f, 1.f, 1.f}, {1, 5});
  Tensor<float> bias({1});
  Tensor<float> y = ops::causal_conv1d(x, kernel, bias);
  CHECK(y.at(0) == 2.0f);
  CHECK(y.at(1) == 5.0f);
}

TEST_CASE("layer norm output is standardized before affine") {
  RngStream rng(31);
  Tensor<double> x = randn<double>({7, 16}, rng, 4.0);
  Tensor<double> gain = Tensor<double>::full({16}, 1.0);
  Tensor<double> offset({16});
  Tensor<double> y = ops::layer_norm(x, gain, offset);
  for (std::size_t r = 0; r < 7; ++r) {
    double mu = 0.0, var = 0.0;
    for (std::size_t c = 0; c < 16; ++c) mu += y.at(r * 16 + c);
    mu /= 16;
    for (std::size_t c = 0; c < 16; ++c) {
      const double d = y.at(r * 16 + c) - mu;
      var += d * d;
    }
    var /= 16;
    CHECK(std::abs(mu) < 1e-5);
    CHECK(std::abs(var - 1.0) < 1e-4);
  }
}

TEST_CASE("broadcast is limited to leading dimensions") {
  Tensor<float> a({2, 3, 4});
  Tensor<float> bad({2, 3});  // not a suffix of (2,3,4)
  CHECK_THROWS_AS(ops::add(a, bad), std::invalid_argument);
  Tensor<float> good({3, 4});
  CHECK_NOTHROW(ops::add(a, good));
}

TEST_CASE("debug finite check flags NaN outputs") {
  FiniteCheckGuard guard;
  Tensor<float> x = t1<float>({1e30f, 1e30f});
  CHECK_THROWS_AS(ops::exp(ops::mul(x, x)), std::runtime_error);
}

TEST_CASE("patchify enumerates strided starts") {
  // L=10, P=4, S=2 -> starts {0,2,4,6}
  std::vector<float> vals(10);
  for (int i = 0; i < 10; ++i) vals[i] = static_cast<float>(i);
  Tensor<float> x = Tensor<float>::from(vals, {1, 1, 10});
  Tensor<float> p = ops::patchify(x, 4, 2, true);
  REQUIRE(p.shape() == Shape{1, 4, 4});
  for (std::size_t j = 0; j < 4; ++j) {
    for (std::size_t t = 0; t < 4; ++t) {
      CHECK(p.at(j * 4 + t) == static_cast<float>(j * 2 + t));
    }
  }
}

TEST_CASE("tensor allocation stats track live bytes") {
  const auto before = AllocStats::live_bytes();
  {
    Tensor<float> t({256});
    CHECK(AllocStats::live_bytes() == before + 1024);
  }
  CHECK(AllocStats::live_bytes() == before);
}

TEST_CASE("gradients accumulate across shared subexpressions") {
  Tensor<double> w = t1<double>({3.0});
  w.set_requires_grad(true);
  TapeScope<double> scope;
  Tensor<double> y = ops::add(ops::mul(w, w), ops::mul(w, w));
  scope.tape().backward(ops::sum_all(y));
  CHECK(w.grad()[0] == doctest::Approx(12.0));  // d/dw of 2w^2
}
