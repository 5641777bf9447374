#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "ega/adam.hpp"
#include "ega/errors.hpp"
#include "ega/gradcheck.hpp"
#include "ega/ops.hpp"
#include "ega/parameters.hpp"

using namespace ega;
using namespace ega::ad;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> v(numel_of(shape));
  for (auto& x : v) x = n(rng);
  return Tensor(std::move(shape), std::move(v));
}

class AutodiffTest : public ::testing::Test {
 protected:
  void SetUp() override {
    Tape::active().reset();
    set_numeric_checks(true);
  }
  void TearDown() override { Tape::active().reset(); }
};

}  // namespace

TEST_F(AutodiffTest, MatmulIdentity) {
  std::mt19937_64 rng(1);
  Tensor m = random_tensor({3, 3}, rng);
  Tensor eye({3, 3}, std::vector<double>{1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor out = matmul(eye, m);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(out[i], m[i]);
}

TEST_F(AutodiffTest, MatmulShapeErrorNamesBothShapes) {
  Tensor a({2, 3}), b({4, 5});
  try {
    matmul(a, b);
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("[2, 3]"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("[4, 5]"), std::string::npos);
  }
}

TEST_F(AutodiffTest, SoftmaxOfZerosIsUniform) {
  Tensor s = softmax(Tensor({3}, 0.0), 0);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(s[i], 1.0 / 3.0, 1e-15);
}

TEST_F(AutodiffTest, Conv1dLengthMatchesSlidingWindow) {
  // Oracle: count the windows by sliding a kernel-wide frame along the input.
  auto windows = [](std::size_t len, std::size_t k, std::size_t s) {
    std::size_t n = 0;
    for (std::size_t start = 0; start + k <= len; start += s) ++n;
    return n;
  };
  Tensor x({1, 10}, 1.0), w({1, 1, 3}, 1.0);
  EXPECT_EQ(conv1d(x, w, Tensor(), 3).dim(1), 3u);
  EXPECT_EQ(windows(10, 3, 3), 3u);
  for (std::size_t len = 3; len < 60; ++len)
    for (std::size_t k = 1; k <= 3; ++k)
      for (std::size_t s = 1; s <= 3; ++s)
        EXPECT_EQ(conv1d(Tensor({2, len}, 1.0), Tensor({1, 2, k}, 1.0), Tensor(), s).dim(1),
                  windows(len, k, s));
}

TEST_F(AutodiffTest, Conv1dTooShortInput) {
  EXPECT_THROW(conv1d(Tensor({1, 2}), Tensor({1, 1, 3}), Tensor(), 1), ShapeError);
}

TEST_F(AutodiffTest, BackwardSumOfSquares) {
  Tensor x = Tensor::vector({1, 2, 3}, true);
  backward(sum_all(mul(x, x)));
  ASSERT_TRUE(x.has_grad());
  EXPECT_EQ(x.grad()[0], 2.0);
  EXPECT_EQ(x.grad()[1], 4.0);
  EXPECT_EQ(x.grad()[2], 6.0);
}

TEST_F(AutodiffTest, BackwardMean) {
  Tensor x = Tensor::vector({1, -2, 3, 7}, true);
  backward(mean_all(x));
  for (double g : x.grad()) EXPECT_EQ(g, 0.25);
}

TEST_F(AutodiffTest, GradientAccumulatesAcrossUses) {
  Tensor x = Tensor::vector({0.5, -1.5}, true);
  backward(sum_all(add(x, x)));
  EXPECT_EQ(x.grad()[0], 2.0);
  EXPECT_EQ(x.grad()[1], 2.0);
}

TEST_F(AutodiffTest, NonRequiringTensorsGetNoGrad) {
  Tensor x = Tensor::vector({1, 2}, true);
  Tensor c = Tensor::vector({3, 4}, false);
  backward(sum_all(mul(x, c)));
  EXPECT_TRUE(x.has_grad());
  EXPECT_FALSE(c.has_grad());
}

TEST_F(AutodiffTest, BackwardOnNonScalarIsError) {
  Tensor x = Tensor::vector({1, 2}, true);
  EXPECT_THROW(backward(scale(x, 2.0)), ShapeError);
}

TEST_F(AutodiffTest, BackwardTwiceWithoutResetIsError) {
  Tensor x = Tensor::vector({1, 2}, true);
  Tensor loss = sum_all(x);
  backward(loss);
  EXPECT_THROW(backward(loss), std::logic_error);
  Tape::active().reset();
  x.clear_grad();
  Tensor loss2 = sum_all(x);
  EXPECT_NO_THROW(backward(loss2));
}

TEST_F(AutodiffTest, ResetReleasesIntermediates) {
  Tensor x = Tensor::vector({1, 2}, true);
  std::weak_ptr<TensorImpl> weak;
  {
    Tensor y = scale(x, 3.0);
    weak = y.shared();
    Tensor loss = sum_all(y);
  }
  EXPECT_FALSE(weak.expired());
  Tape::active().reset();
  EXPECT_TRUE(weak.expired());
  EXPECT_EQ(Tape::active().size(), 0u);
}

TEST_F(AutodiffTest, NumericFaultInCheckedMode) {
  EXPECT_THROW(log(Tensor::vector({-1.0})), NumericFault);
  set_numeric_checks(false);
  EXPECT_NO_THROW(log(Tensor::vector({-1.0})));
  set_numeric_checks(true);
}

TEST_F(AutodiffTest, MlpMatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  Tensor x = random_tensor({4, 5}, rng);
  Tensor w1 = random_tensor({5, 6}, rng, 0.5), b1 = random_tensor({6}, rng, 0.1);
  Tensor w2 = random_tensor({6, 6}, rng, 0.5), b2 = random_tensor({6}, rng, 0.1);
  Tensor w3 = random_tensor({6, 2}, rng, 0.5), b3 = random_tensor({2}, rng, 0.1);
  auto f = [&] {
    Tensor h = gelu(add(matmul(x, w1), b1));
    h = gelu(add(matmul(h, w2), b2));
    Tensor out = add(matmul(h, w3), b3);
    return mean_all(mul(out, out));
  };
  const auto r = grad_check(f, {w1, b1, w2, b2, w3, b3, x}, 1e-5);
  EXPECT_TRUE(r.ok(1e-4)) << r.summary();
}

TEST_F(AutodiffTest, GradCheckQuadraticIsExact) {
  const auto r = grad_check([](const Tensor& x) { return sum_all(mul(x, x)); }, Tensor::vector({3.0}));
  EXPECT_LT(r.max_rel_error, 1e-8);
  EXPECT_TRUE(r.kinks.empty());
}

TEST_F(AutodiffTest, GradCheckFlagsReluKink) {
  const auto r = grad_check([](const Tensor& x) { return sum_all(relu(x)); }, Tensor::vector({0.0}));
  ASSERT_EQ(r.kinks.size(), 1u);
  EXPECT_EQ(r.kinks[0].second, 0u);
}

TEST_F(AutodiffTest, GradCheckReportsNonFiniteCoordinate) {
  set_numeric_checks(false);
  // log at 1e-6 with h = 1e-5: the minus probe lands on a negative argument.
  const auto r = grad_check([](const Tensor& x) { return sum_all(log(x)); },
                            Tensor::vector({1.0, 1e-6}), 1e-5);
  ASSERT_TRUE(r.non_finite.has_value());
  EXPECT_EQ(r.non_finite->second, 1u);
  set_numeric_checks(true);
}

// Finite-difference property across layer types, 10 seeds each.
TEST_F(AutodiffTest, LayerGradientsMatchFiniteDifferences) {
  for (int seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    {
      Tensor x = random_tensor({3, 12}, rng), w = random_tensor({4, 3, 3}, rng, 0.5),
             b = random_tensor({4}, rng, 0.1);
      auto f = [&] { return sum_all(mul(conv1d(x, w, b, 2), conv1d(x, w, b, 2))); };
      const auto r = grad_check(f, {x, w, b});
      EXPECT_TRUE(r.ok(1e-4)) << "conv1d seed " << seed << ": " << r.summary();
    }
    {
      Tensor x = random_tensor({4, 7}, rng), g = random_tensor({4}, rng), b = random_tensor({4}, rng);
      Tensor probe = random_tensor({4, 7}, rng);
      auto f = [&] { return sum_all(mul(group_norm(x, 2, g, b), probe)); };
      const auto r = grad_check(f, {x, g, b});
      EXPECT_TRUE(r.ok(1e-4)) << "group_norm seed " << seed << ": " << r.summary();
    }
    {
      Tensor logits = random_tensor({3, 5}, rng, 2.0);
      Tensor probe = random_tensor({3, 5}, rng);
      auto f = [&] { return sum_all(mul(softmax(logits, 1), probe)); };
      const auto r = grad_check(f, {logits});
      EXPECT_TRUE(r.ok(1e-4)) << "softmax seed " << seed << ": " << r.summary();
      auto ce = [&] { return scale(sum_all(slice(log_softmax(logits, 1), 1, 2, 3)), -1.0); };
      const auto r2 = grad_check(ce, {logits});
      EXPECT_TRUE(r2.ok(1e-4)) << "cross-entropy seed " << seed << ": " << r2.summary();
    }
    {
      Tensor a = random_tensor({4, 6}, rng), b = random_tensor({4, 6}, rng);
      auto f = [&] { return sum_all(cosine_similarity_rows(a, b)); };
      const auto r = grad_check(f, {a, b});
      EXPECT_TRUE(r.ok(1e-4)) << "cosine seed " << seed << ": " << r.summary();
    }
    {
      Tensor a = random_tensor({3, 4}, rng), b = random_tensor({2, 4}, rng);
      Tensor probe = random_tensor({4, 5}, rng);
      auto f = [&] {
        Tensor c = concat({a, b}, 0);
        Tensor t = transpose(leaky_relu(c, 0.2));
        Tensor s = slice(gather_rows(transpose(t), {4, 0, 0, 2}), 1, 1, 3);
        return add(sum_all(mul(t, probe)), mean_all(mean(s, 0)));
      };
      const auto r = grad_check(f, {a, b});
      EXPECT_TRUE(r.ok(1e-4)) << "shape ops seed " << seed << ": " << r.summary();
    }
  }
}

TEST_F(AutodiffTest, IdenticalInputsGiveBitwiseIdenticalGradients) {
  auto run = [] {
    std::mt19937_64 rng(99);
    Tensor x = random_tensor({5, 40}, rng), w = random_tensor({8, 5, 2}, rng, true);
    w.set_requires_grad(true);
    Tape::active().reset();
    Tensor y = gelu(group_norm(conv1d(x, w, Tensor(), 2), 1, Tensor(), Tensor()));
    Tensor loss = mean_all(mul(y, y));
    backward(loss);
    std::vector<double> out(w.grad().begin(), w.grad().end());
    out.push_back(loss.item());
    Tape::active().reset();
    return out;
  };
  const auto a = run(), b = run();
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)), 0);
}

TEST(Adam, ZeroGradientsLeaveParametersUnchanged) {
  ParameterSet ps;
  ps.add("w", Tensor::vector({1.5, -2.0, 0.25}));
  const auto before = ps.digest();
  Adam adam(AdamOptions{.lr = 1e-2});
  ps.get("w").grad_buffer();
  adam.step(ps);
  EXPECT_EQ(ps.digest(), before);
  EXPECT_EQ(adam.steps(), 1);
}

TEST(Adam, FirstStepIsLrTimesSign) {
  ParameterSet ps;
  ps.add("w", Tensor::scalar(1.0));
  ps.get("w").grad_buffer()[0] = 0.5;
  Adam adam(AdamOptions{.lr = 1e-2});
  adam.step(ps);
  // m_hat = 0.5, v_hat = 0.25: step = lr * 0.5 / (0.5 + 1e-8)
  const double expected = 1.0 - 1e-2 * 0.5 / (0.5 + 1e-8);
  EXPECT_DOUBLE_EQ(ps.get("w")[0], expected);
  EXPECT_NEAR(ps.get("w")[0], 0.99, 1e-9);
  EXPECT_FALSE(ps.get("w").has_grad());
}

TEST(Adam, FrozenParameterUnchanged) {
  ParameterSet ps;
  ps.add("enc.w", Tensor::vector({1.0, 2.0}), false);
  ps.add("head.w", Tensor::vector({1.0, 2.0}), true);
  ps.get("head.w").grad_buffer() = {0.3, -0.3};
  const auto frozen = ps.digest("enc.");
  Adam adam(AdamOptions{.lr = 1e-1});
  adam.step(ps);
  EXPECT_EQ(ps.digest("enc."), frozen);
  EXPECT_NE(ps.get("head.w")[0], 1.0);
  EXPECT_FALSE(adam.has_state("enc.w"));
}

TEST(Adam, MissingGradIsError) {
  ParameterSet ps;
  ps.add("w", Tensor::scalar(1.0));
  Adam adam;
  EXPECT_THROW(adam.step(ps), std::logic_error);
}

TEST(Adam, StepCounterIncrementsByOne) {
  ParameterSet ps;
  ps.add("w", Tensor::scalar(1.0));
  Adam adam;
  for (int i = 1; i <= 3; ++i) {
    ps.get("w").grad_buffer()[0] = 1.0;
    adam.step(ps);
    EXPECT_EQ(adam.steps(), i);
  }
}

TEST_F(AutodiffTest, TwoIdenticalTrainingStepsGiveIdenticalUpdates) {
  auto step = [](ParameterSet& ps, Adam& adam) {
    Tape::active().reset();
    Tensor x({2, 3}, std::vector<double>{0.1, -0.4, 0.3, 0.9, 0.2, -0.7});
    Tensor loss = mean_all(mul(matmul(x, ps.get("w")), matmul(x, ps.get("w"))));
    backward(loss);
    adam.step(ps);
    Tape::active().reset();
  };
  auto make = [] {
    ParameterSet ps;
    ps.add("w", Tensor({3, 2}, std::vector<double>{0.5, -0.2, 0.1, 0.7, -0.3, 0.4}));
    return ps;
  };
  ParameterSet a = make(), b = make();
  Adam oa(AdamOptions{.lr = 1e-2}), ob(AdamOptions{.lr = 1e-2});
  step(a, oa);
  step(b, ob);
  EXPECT_EQ(a.digest(), b.digest());
}
