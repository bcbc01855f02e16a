#include <cmath>
#include <random>

#include "coirl/autodiff/ops.hpp"
#include "doctest.h"

using namespace coirl;
using namespace coirl::ad;

namespace {

std::vector<Real> random_values(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<Real> v(n);
  for (auto& x : v) x = static_cast<Real>(dist(rng));
  return v;
}

// Independent triple-loop product in double.
std::vector<double> triple_loop(const std::vector<Real>& a, const std::vector<Real>& b, std::size_t m, std::size_t k,
                                std::size_t p) {
  std::vector<double> c(m * p, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < p; ++j)
      for (std::size_t l = 0; l < k; ++l) c[i * p + j] += double(a[i * k + l]) * double(b[l * p + j]);
  return c;
}

}  // namespace

TEST_CASE("matmul identity and projector") {
  auto eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  auto m = Tensor::from({2, 2}, {1, 2, 3, 4});
  auto r = matmul(eye, m);
  CHECK(std::vector<Real>(r.data().begin(), r.data().end()) == std::vector<Real>{1, 2, 3, 4});

  auto proj = Tensor::from({2, 2}, {1, 0, 0, 0});
  auto col = Tensor::from({2, 1}, {5, 7});
  auto r2 = matmul(proj, col);
  CHECK(r2.shape() == Shape{2, 1});
  CHECK(r2.at(0) == 5);
  CHECK(r2.at(1) == 0);
}

TEST_CASE("matmul matches triple-loop oracle") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    auto av = random_values(12, rng);
    auto bv = random_values(8, rng);
    auto c = matmul(Tensor::from({3, 4}, av), Tensor::from({4, 2}, bv));
    auto oracle = triple_loop(av, bv, 3, 4, 2);
    for (std::size_t i = 0; i < oracle.size(); ++i) {
      CHECK(std::abs(c.at(i) - oracle[i]) <= 1e-6 * std::max(1.0, std::abs(oracle[i])));
    }
  }
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
  CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), DimensionError);
}

TEST_CASE("elementwise closed forms") {
  CHECK(exp(Tensor::scalar(0)).item() == doctest::Approx(1.0));
  CHECK(softplus(Tensor::scalar(0)).item() == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  CHECK(tanh(Tensor::scalar(0)).item() == 0);
  CHECK(relu(Tensor::scalar(-2)).item() == 0);
  CHECK(neg(Tensor::scalar(3)).item() == -3);
  CHECK(square(Tensor::scalar(-3)).item() == 9);
  CHECK_THROWS_AS(log(Tensor::scalar(0)), DomainError);
  CHECK_THROWS_AS(log(Tensor::scalar(-1)), DomainError);
  CHECK_THROWS_AS(add(Tensor::zeros({2}), Tensor::zeros({3})), DimensionError);
}

TEST_CASE("scalar broadcast in both positions") {
  auto x = Tensor::from({3}, {1, 2, 3}, true);
  auto s = Tensor::scalar(2, true);
  auto y = sum(mul(s, x));
  CHECK(y.item() == 12);
  backward(y);
  CHECK(s.grad()[0] == 6);
  CHECK(x.grad()[0] == 2);
}

TEST_CASE("backward basics") {
  SUBCASE("d/dx x^2 at 3") {
    auto x = Tensor::scalar(3, true);
    backward(square(x));
    CHECK(x.grad()[0] == doctest::Approx(6));
  }
  SUBCASE("sum gives ones") {
    auto w = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6}, true);
    backward(sum(w));
    for (Real g : w.grad()) CHECK(g == 1);
  }
  SUBCASE("mse against zero") {
    auto w = Tensor::from({1}, {2}, true);
    backward(mse_loss(w, Tensor::zeros({1})));
    CHECK(w.grad()[0] == doctest::Approx(4));
  }
  SUBCASE("gradients accumulate across backward calls") {
    auto x = Tensor::scalar(1, true);
    backward(scale(x, 2));
    backward(scale(x, 2));
    CHECK(x.grad()[0] == 4);
  }
  SUBCASE("non-scalar root is a usage error") {
    auto w = Tensor::from({2}, {1, 2}, true);
    CHECK_THROWS_AS(backward(w), UsageError);
  }
}

TEST_CASE("tape visits inputs before users, each node once") {
  auto x = Tensor::scalar(2, true);
  auto y = mul(x, x);
  auto z = add(y, y);
  ComputationTape tape(z);
  const auto& order = tape.order();
  CHECK(order.size() == 3);
  CHECK(order.front() == x.node().get());
  CHECK(order.back() == z.node().get());
  tape.run_backward();
  CHECK(x.grad()[0] == doctest::Approx(8));  // d(2x^2)/dx
}

TEST_CASE("no-grad guard records nothing") {
  auto x = Tensor::scalar(2, true);
  NoGradGuard guard;
  auto y = square(x);
  CHECK_FALSE(y.requires_grad());
  CHECK(y.is_leaf());
}

TEST_CASE("masked attention examples") {
  std::mt19937_64 rng(3);
  SUBCASE("single position returns v") {
    auto q = Tensor::from({1, 4}, random_values(4, rng));
    auto k = Tensor::from({1, 4}, random_values(4, rng));
    auto v = Tensor::from({1, 4}, random_values(4, rng));
    auto out = masked_attention(q, k, v, AttentionMask::none(1, 1));
    for (std::size_t i = 0; i < 4; ++i) CHECK(out.at(i) == doctest::Approx(v.at(i)));
  }
  SUBCASE("diagonal-only mask returns v row for row") {
    auto q = Tensor::from({3, 4}, random_values(12, rng));
    auto k = Tensor::from({3, 4}, random_values(12, rng));
    auto v = Tensor::from({3, 4}, random_values(12, rng));
    auto out = masked_attention(q, k, v, AttentionMask::diagonal(3));
    for (std::size_t i = 0; i < 12; ++i) CHECK(out.at(i) == v.at(i));
  }
  SUBCASE("inverse-causal: last row depends only on last inputs") {
    auto qv = random_values(12, rng), kv = random_values(12, rng), vv = random_values(12, rng);
    auto base = masked_attention(Tensor::from({3, 4}, qv), Tensor::from({3, 4}, kv), Tensor::from({3, 4}, vv),
                                 AttentionMask::inverse_causal(3));
    for (std::size_t i = 0; i < 8; ++i) {  // perturb rows 0 and 1 of every input
      qv[i] += 0.5f;
      kv[i] -= 0.25f;
      vv[i] += 1.0f;
    }
    auto pert = masked_attention(Tensor::from({3, 4}, qv), Tensor::from({3, 4}, kv), Tensor::from({3, 4}, vv),
                                 AttentionMask::inverse_causal(3));
    for (std::size_t j = 8; j < 12; ++j) CHECK(pert.at(j) == base.at(j));
    bool changed = false;
    for (std::size_t j = 0; j < 8; ++j) changed = changed || pert.at(j) != base.at(j);
    CHECK(changed);
  }
  SUBCASE("fully masked row is a configuration error") {
    AttentionMask m(2, 2);
    m.set_blocked(1, 0, true);
    m.set_blocked(1, 1, true);
    CHECK_THROWS_AS(masked_softmax(Tensor::zeros({2, 2}), m), ConfigError);
  }
}

TEST_CASE("softmax rows sum to one under random legal masks") {
  std::mt19937_64 rng(11);
  std::bernoulli_distribution coin(0.5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + trial % 7;
    AttentionMask mask(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) mask.set_blocked(i, j, coin(rng));
      mask.set_blocked(i, rng() % n, false);
    }
    auto p = masked_softmax(Tensor::from({n, n}, random_values(n * n, rng, -5, 5)), mask);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < n; ++j) {
        s += p.at(i, j);
        if (mask.blocked(i, j)) CHECK(p.at(i, j) == 0);
      }
      CHECK(std::abs(s - 1.0) <= 1e-6);
    }
  }
}

TEST_CASE("tape determinism: identical inputs give bitwise identical values and grads") {
  auto run = [] {
    std::mt19937_64 rng(5);
    auto w = Tensor::from({4, 3}, random_values(12, rng), true);
    auto x = Tensor::from({2, 4}, random_values(8, rng));
    auto loss = mean(square(tanh(matmul(x, w))));
    backward(loss);
    std::vector<Real> out{loss.item()};
    out.insert(out.end(), w.grad().begin(), w.grad().end());
    return out;
  };
  CHECK(run() == run());
}

TEST_CASE("shape helpers") {
  auto x = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  auto t = tile_rows(slice_rows(x, 1, 2), 3);
  CHECK(t.shape() == Shape{3, 3});
  CHECK(t.at(2, 2) == 6);
  backward(sum(t));
  CHECK(x.grad()[0] == 0);
  CHECK(x.grad()[3] == 3);
  CHECK_THROWS_AS(reshape(x, {4}), DimensionError);
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), DimensionError);
  std::vector<Tensor> parts{Tensor::zeros({2, 1}), Tensor::zeros({3, 1})};
  CHECK_THROWS_AS(concat_cols(parts), DimensionError);
}

TEST_CASE("softplus_clamp floors and caps sigma") {
  auto x = Tensor::from({3}, {-50, 0, 50}, true);
  auto y = softplus_clamp(x, 1e-3f, 2.0f);
  CHECK(y.at(0) == doctest::Approx(1e-3));
  CHECK(y.at(1) == doctest::Approx(std::log(2.0)));
  CHECK(y.at(2) == doctest::Approx(2.0));
  backward(sum(y));
  CHECK(x.grad()[0] == 0);
  CHECK(x.grad()[1] == doctest::Approx(0.5));
  CHECK(x.grad()[2] == 0);
}
