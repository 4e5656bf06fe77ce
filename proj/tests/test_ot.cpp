#include <gtest/gtest.h>

#include <cmath>

#include "mcl/errors.hpp"
#include "mcl/ot.hpp"
#include "mcl/rng.hpp"

using namespace mcl;

namespace {

Tensor random_unit_rows(std::size_t n, std::size_t d, Rng& rng) {
  Tensor t = Tensor::zeros(n, d);
  for (double& v : t.data()) v = rng.normal();
  return normalize_rows(t);
}

ot::SinkhornConfig balanced(double eps) {
  ot::SinkhornConfig cfg;
  cfg.mode = ot::SinkhornMode::balanced;
  cfg.epsilon = eps;
  cfg.max_iters = 100000;
  cfg.tolerance = 1e-12;
  return cfg;
}

}  // namespace

TEST(CostMatrix, CosineValues) {
  const Tensor ref = Tensor::from_rows({{1, 0}});
  const Tensor targets = Tensor::from_rows({{1, 0}, {0, 1}, {-1, 0}});
  const Tensor c = ot::cost_matrix(ref, targets).values;
  EXPECT_NEAR(c(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(c(0, 1), 1.0, 1e-15);
  EXPECT_NEAR(c(0, 2), 2.0, 1e-15);
}

TEST(CostMatrix, RejectsNonUnitRows) {
  EXPECT_THROW(ot::cost_matrix(Tensor::from_rows({{2, 0}}), Tensor::from_rows({{1, 0}})),
               ContractError);
}

TEST(CostMatrix, DifferentiableMatchesPlain) {
  Rng rng(1);
  const Tensor r = random_unit_rows(3, 4, rng), t = random_unit_rows(5, 4, rng);
  EXPECT_EQ(ot::cost_matrix(r, ad::constant(t)).value(), ot::cost_matrix(r, t).values);
}

TEST(SinkhornBalanced, ZeroCostIsIndependentCoupling) {
  const auto mu = ot::uniform_marginal(2);
  const auto plan = ot::sinkhorn_balanced(Tensor::zeros(2, 2), mu, mu, balanced(0.05));
  for (double v : plan.gamma.data()) EXPECT_NEAR(v, 0.25, 1e-12);
  EXPECT_TRUE(plan.converged);
}

TEST(SinkhornBalanced, TwoByTwoAntiCost) {
  const auto mu = ot::uniform_marginal(2);
  const auto plan =
      ot::sinkhorn_balanced(Tensor::from_rows({{0, 1}, {1, 0}}), mu, mu, balanced(0.01));
  EXPECT_NEAR(plan.gamma(0, 0), 0.5, 1e-3);
  EXPECT_NEAR(plan.gamma(1, 1), 0.5, 1e-3);
  EXPECT_NEAR(plan.gamma(0, 1), 0.0, 1e-3);
  EXPECT_NEAR(plan.gamma(1, 0), 0.0, 1e-3);
}

TEST(SinkhornBalanced, CloseToBruteForceAtSmallEpsilon) {
  Rng rng(2);
  const Tensor cost = ot::cost_matrix(random_unit_rows(5, 3, rng), random_unit_rows(5, 3, rng)).values;
  const auto mu = ot::uniform_marginal(5);
  const auto plan = ot::sinkhorn_balanced(cost, mu, mu, balanced(0.001));
  EXPECT_NEAR(ot::transport_cost(plan.gamma, cost), ot::exact_ot_bruteforce(cost), 1e-3);
  EXPECT_LE(plan.marginal_violation, 1e-6);
}

TEST(SinkhornBalanced, RejectsBadMarginals) {
  const std::vector<double> mu{0.5, 0.6};
  EXPECT_THROW(ot::sinkhorn_balanced(Tensor::zeros(2, 2), mu, ot::uniform_marginal(2), balanced(0.1)),
               ParameterError);
  EXPECT_THROW(ot::sinkhorn_balanced(Tensor::zeros(2, 3), ot::uniform_marginal(2),
                                     ot::uniform_marginal(2), balanced(0.1)),
               ParameterError);
  ot::SinkhornConfig bad = balanced(0.0);
  EXPECT_THROW(bad.validate(), ParameterError);
}

TEST(SinkhornUnbalanced, LargeRhoMatchesBalanced) {
  Rng rng(3);
  for (int k = 0; k < 5; ++k) {
    const Tensor cost = ot::cost_matrix(random_unit_rows(3, 4, rng), random_unit_rows(6, 4, rng)).values;
    const auto mu = ot::uniform_marginal(3), nu = ot::uniform_marginal(6);
    ot::SinkhornConfig u = balanced(0.05);
    u.mode = ot::SinkhornMode::unbalanced;
    u.rho = 1e6;
    const auto p = ot::sinkhorn_balanced(cost, mu, nu, balanced(0.05));
    const auto q = ot::sinkhorn_unbalanced(cost, mu, nu, u);
    for (std::size_t i = 0; i < p.gamma.size(); ++i) EXPECT_NEAR(p.gamma[i], q.gamma[i], 1e-4);
  }
}

TEST(SinkhornUnbalanced, AbsentClassShedsMass) {
  // Prototype 2 points away from every target sample.
  const Tensor protos = Tensor::from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  Tensor targets = Tensor::zeros(6, 3);
  for (std::size_t j = 0; j < 6; ++j) {
    targets(j, j % 2) = 1.0;
    targets(j, 2) = -0.999;
  }
  targets = normalize_rows(targets);
  const Tensor cost = ot::cost_matrix(protos, targets).values;
  const auto mu = ot::uniform_marginal(3), nu = ot::uniform_marginal(6);
  ot::SinkhornConfig cfg;
  cfg.max_iters = 10000;
  const auto unb = ot::sinkhorn_unbalanced(cost, mu, nu, cfg);
  const auto bal = ot::sinkhorn_balanced(cost, mu, nu, balanced(cfg.epsilon));
  double row_unb = 0.0, row_bal = 0.0;
  for (std::size_t j = 0; j < 6; ++j) {
    row_unb += unb.gamma(2, j);
    row_bal += bal.gamma(2, j);
  }
  EXPECT_LT(row_unb, mu[2]);
  EXPECT_LT(row_unb, row_bal);
  EXPECT_LE(unb.total_mass(), 1.0 + 1e-12);
}

TEST(SinkhornUnbalanced, ZeroCostIsProportionalToIndependent) {
  const auto mu = ot::uniform_marginal(2), nu = ot::uniform_marginal(3);
  ot::SinkhornConfig cfg;
  cfg.max_iters = 10000;
  const auto plan = ot::sinkhorn_unbalanced(Tensor::zeros(2, 3), mu, nu, cfg);
  const double ratio = plan.gamma(0, 0) / (mu[0] * nu[0]);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(plan.gamma(i, j) / (mu[i] * nu[j]), ratio, 1e-9);
}

TEST(SinkhornUnbalanced, MassNeverExceedsOne) {
  Rng rng(4);
  for (int k = 0; k < 10; ++k) {
    const Tensor cost = ot::cost_matrix(random_unit_rows(3, 5, rng), random_unit_rows(8, 5, rng)).values;
    const auto plan = ot::sinkhorn_unbalanced(cost, ot::uniform_marginal(3), ot::uniform_marginal(8), {});
    EXPECT_LE(plan.total_mass(), 1.0 + 1e-12);
    for (double v : plan.gamma.data()) EXPECT_GE(v, 0.0);
  }
}

TEST(InterLoss, ClosedForms) {
  const Tensor gamma = Tensor::from_rows({{0.1, 0.2}, {0.3, 0.4}});
  EXPECT_EQ(ot::inter_loss(gamma, ad::constant(Tensor::zeros(2, 2))).value().item(), 0.0);
  EXPECT_NEAR(ot::inter_loss(gamma, ad::constant(Tensor::filled(2, 2, 1.0))).value().item(), 1.0,
              1e-15);
  EXPECT_THROW(ot::inter_loss(gamma, ad::constant(Tensor::zeros(2, 3))), DimensionError);
}

TEST(InterLoss, MatchesDoubleSum) {
  Rng rng(5);
  Tensor gamma = Tensor::zeros(3, 4), cost = Tensor::zeros(3, 4);
  for (double& v : gamma.data()) v = rng.uniform();
  for (double& v : cost.data()) v = rng.uniform(0.0, 2.0);
  double expected = 0.0;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) expected += gamma(i, j) * cost(i, j);
  EXPECT_NEAR(ot::inter_loss(gamma, ad::constant(cost)).value().item(), expected, 1e-12);
}

TEST(ExactOt, Permutations) {
  EXPECT_EQ(ot::exact_ot_bruteforce(Tensor::from_rows({{0, 1, 1}, {1, 0, 1}, {1, 1, 0}})), 0.0);
  EXPECT_EQ(ot::exact_ot_bruteforce(Tensor::from_rows({{0, 1}, {1, 0}})), 0.0);
  EXPECT_EQ(ot::exact_ot_bruteforce(Tensor::from_rows({{1, 0}, {0, 1}})), 0.0);
  EXPECT_DOUBLE_EQ(ot::exact_ot_bruteforce(Tensor::from_rows({{1, 2}, {3, 5}})), 2.5);
  EXPECT_THROW(ot::exact_ot_bruteforce(Tensor::zeros(2, 3)), DimensionError);
}
