#include <gtest/gtest.h>

#include <cmath>

#include "mcl/autodiff.hpp"
#include "mcl/errors.hpp"
#include "mcl/grad_check.hpp"
#include "mcl/rng.hpp"

using namespace mcl;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t = Tensor::zeros(r, c);
  for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
  return t;
}

}  // namespace

TEST(Tensor, MatmulIdentity) {
  const Tensor a = Tensor::from_rows({{1, 2}, {3, 4}});
  EXPECT_EQ(matmul(Tensor::identity(2), a), a);
}

TEST(Tensor, MatmulOrthogonal) {
  const Tensor out = matmul(Tensor::from_rows({{1, 0}}), Tensor::from_rows({{0}, {1}}));
  EXPECT_EQ(out.rows(), 1u);
  EXPECT_EQ(out.cols(), 1u);
  EXPECT_EQ(out.item(), 0.0);
}

TEST(Tensor, MatmulShapeMismatch) {
  EXPECT_THROW(matmul(Tensor::zeros(2, 3), Tensor::zeros(2, 3)), DimensionError);
}

TEST(Tensor, NormalizeRowsRejectsZeroRow) {
  EXPECT_THROW(normalize_rows(Tensor::zeros(2, 3)), DegenerateFeatureError);
}

TEST(Autodiff, MatmulGradientOfSum) {
  const Tensor a = random_matrix(3, 4, 1), b = random_matrix(4, 2, 2);
  const ad::Var va = ad::parameter(a);
  ad::backward(ad::sum(ad::matmul(va, ad::constant(b))));
  const Tensor expected = matmul(Tensor::filled(3, 2, 1.0), b.transposed());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_NEAR(va.grad()[i], expected[i], 1e-12);
  }
  const auto report = ad::grad_check(
      [&](const ad::Var& x) { return ad::sum(ad::matmul(x, ad::constant(b))); }, a);
  EXPECT_TRUE(report.passed) << report.max_relative_error;
}

TEST(Autodiff, SoftmaxZerosIsUniform) {
  const Tensor p = ad::softmax_rows(ad::constant(Tensor::zeros(1, 3)), 1.0).value();
  for (double v : p.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Autodiff, SoftmaxHighTemperatureFlattens) {
  const Tensor p = ad::softmax_rows(ad::constant(Tensor::from_rows({{5, -5}})), 1000.0).value();
  EXPECT_NEAR(p[0], 0.5, 1e-2);
  EXPECT_NEAR(p[1], 0.5, 1e-2);
}

TEST(Autodiff, SoftmaxHandValue) {
  const Tensor p = ad::softmax_rows(ad::constant(Tensor::from_rows({{2, 0}})), 1.0).value();
  const double e2 = std::exp(2.0);
  EXPECT_NEAR(p[0], e2 / (e2 + 1.0), 1e-15);
  EXPECT_NEAR(p[0], 0.8808, 1e-4);
  EXPECT_NEAR(p[1], 0.1192, 1e-4);
}

TEST(Autodiff, SoftmaxRejectsNonPositiveTemperature) {
  EXPECT_THROW(ad::softmax_rows(ad::constant(Tensor::zeros(1, 2)), 0.0), ParameterError);
}

TEST(Autodiff, L2NormalizeRows) {
  const Tensor out = ad::l2_normalize_rows(ad::constant(Tensor::from_rows({{3, 4}}))).value();
  EXPECT_NEAR(out[0], 0.6, 1e-15);
  EXPECT_NEAR(out[1], 0.8, 1e-15);
  const Tensor unit = Tensor::from_rows({{0.6, 0.8}});
  EXPECT_EQ(ad::l2_normalize_rows(ad::constant(unit)).value(), unit);
  const auto report = ad::grad_check(
      [](const ad::Var& x) {
        return ad::frobenius_inner(Tensor::from_rows({{0.3, -1.2, 0.7, 2.0}}),
                                   ad::l2_normalize_rows(x));
      },
      random_matrix(1, 4, 3));
  EXPECT_TRUE(report.passed) << report.max_relative_error;
}

TEST(Autodiff, DetachSeversGradient) {
  const Tensor xv = random_matrix(2, 3, 4), yv = random_matrix(2, 3, 5);
  const ad::Var x = ad::parameter(xv), y = ad::parameter(yv);
  const ad::Var d = ad::detach(x);
  EXPECT_EQ(d.value(), xv);
  ad::backward(ad::sum(ad::elementwise_mul(d, y)));
  for (double g : x.grad().data()) EXPECT_EQ(g, 0.0);
  for (std::size_t i = 0; i < xv.size(); ++i) EXPECT_EQ(y.grad()[i], xv[i]);
}

TEST(Autodiff, SquareAndAbsGradients) {
  const Tensor xv = Tensor::from_rows({{1.5, -2.0}, {0.25, -0.5}});
  const ad::Var x = ad::parameter(xv);
  ad::backward(ad::sum(ad::elementwise_mul(x, x)));
  for (std::size_t i = 0; i < xv.size(); ++i) EXPECT_DOUBLE_EQ(x.grad()[i], 2.0 * xv[i]);

  const ad::Var y = ad::parameter(xv);
  ad::backward(ad::sum(ad::abs(y)));
  for (std::size_t i = 0; i < xv.size(); ++i) EXPECT_EQ(y.grad()[i], xv[i] > 0 ? 1.0 : -1.0);
}

TEST(Autodiff, AbsKinkHasZeroSubgradient) {
  const ad::Var x = ad::parameter(Tensor::zeros(1, 2));
  ad::backward(ad::sum(ad::abs(x)));
  EXPECT_EQ(x.grad()[0], 0.0);
}

TEST(Autodiff, LogFloorsInput) {
  const ad::Var x = ad::parameter(Tensor::from_rows({{0.0, 1.0}}));
  const ad::Var y = ad::log(x);
  EXPECT_NEAR(y.value()[0], std::log(1e-12), 1e-9);
  ad::backward(ad::sum(y));
  EXPECT_EQ(x.grad()[0], 0.0);
  EXPECT_EQ(x.grad()[1], 1.0);
}

TEST(Autodiff, BackwardNeedsScalarRoot) {
  const ad::Var x = ad::parameter(Tensor::zeros(2, 2));
  EXPECT_THROW(ad::backward(ad::tanh(x)), ContractError);
}

TEST(Autodiff, SharedSubexpressionAccumulates) {
  const ad::Var x = ad::parameter(Tensor::from_rows({{2.0}}));
  const ad::Var t = ad::tanh(x);
  ad::backward(ad::add(ad::sum(t), ad::sum(ad::elementwise_mul(t, x))));
  const double th = std::tanh(2.0), dt = 1.0 - th * th;
  EXPECT_NEAR(x.grad().item(), dt + dt * 2.0 + th, 1e-12);
}

TEST(Autodiff, ConstantsCarryNoTape) {
  const ad::Var c = ad::constant(Tensor::zeros(2, 2));
  const ad::Var y = ad::tanh(c);
  EXPECT_FALSE(y.requires_grad());
}

TEST(GradCheck, QuadraticErrorIsTiny) {
  const auto report = ad::grad_check(
      [](const ad::Var& x) { return ad::sum(ad::elementwise_mul(x, x)); }, random_matrix(3, 3, 6));
  EXPECT_TRUE(report.passed);
  EXPECT_LT(report.max_relative_error, 1e-8);
}

TEST(GradCheck, RelativeErrorHasUnitFloor) {
  EXPECT_DOUBLE_EQ(ad::gradient_relative_error(1e-9, 2e-9), 1e-9);
  EXPECT_DOUBLE_EQ(ad::gradient_relative_error(10.0, 11.0), 1.0 / 11.0);
}

TEST(GradCheck, DetectsWrongBackward) {
  const auto report = ad::grad_check(
      [](const ad::Var& x) {
        Tensor sq = x.value();
        for (double& v : sq.data()) v *= v;
        // Square whose backward forgets the factor 2x.
        const ad::Var bad = ad::make_op(
            "bad_square", sq, {x}, [](const Tensor& up, std::span<Tensor* const> grads) {
              if (grads[0]) {
                for (std::size_t i = 0; i < up.size(); ++i) (*grads[0])[i] += up[i];
              }
            });
        return ad::sum(bad);
      },
      random_matrix(2, 2, 7));
  EXPECT_FALSE(report.passed);
}

TEST(GradCheck, EveryOpPasses) {
  const Tensor x = random_matrix(3, 4, 8);
  const Tensor w = random_matrix(3, 4, 9);
  const std::size_t cols[] = {3, 1};
  const std::vector<std::function<ad::Var(const ad::Var&)>> ops = {
      [&](const ad::Var& v) { return ad::frobenius_inner(w, ad::tanh(v)); },
      [&](const ad::Var& v) { return ad::frobenius_inner(w, ad::softmax_rows(v, 0.7)); },
      [&](const ad::Var& v) { return ad::sum(ad::log(ad::add_scalar(ad::abs(v), 0.5))); },
      [&](const ad::Var& v) { return ad::mean(ad::select_columns(ad::relu(v), cols)); },
      [&](const ad::Var& v) {
        return ad::frobenius_inner(w, ad::normalize_row_sums(ad::add_scalar(ad::abs(v), 0.1), 1e-8));
      },
      [&](const ad::Var& v) { return ad::sum(ad::matmul(v, ad::transpose(ad::tanh(v)))); },
  };
  for (std::size_t k = 0; k < ops.size(); ++k) {
    const auto report = ad::grad_check(ops[k], x);
    EXPECT_TRUE(report.passed) << "op " << k << ": " << report.max_relative_error;
  }
}
