#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "mcl/data.hpp"
#include "mcl/trainer.hpp"

using namespace mcl;
using train::TrainConfig;

namespace {

struct Fixture {
  data::DomainDataset source;
  data::DomainDataset target;
};

Fixture moons(std::size_t n = 80, std::uint64_t seed = 3) {
  const auto pair = data::gen_two_moons_shift(n, 0.1, 30.0, seed);
  return {pair.source, data::select_shots(pair.target, {3, seed})};
}

train::Batches fixed_batches(const Fixture& fx) {
  train::Batches b;
  std::vector<std::size_t> src(16), unl;
  for (std::size_t i = 0; i < src.size(); ++i) src[i] = i;
  b.source = {fx.source.samples.select_rows(src),
              std::vector<std::size_t>(fx.source.labels.begin(), fx.source.labels.begin() + 16)};
  const auto labeled = fx.target.indices_with_role(data::Role::labeled);
  b.labeled_target.x = fx.target.samples.select_rows(labeled);
  for (std::size_t i : labeled) b.labeled_target.labels.push_back(fx.target.labels[i]);
  const auto pool = fx.target.indices_with_role(data::Role::unlabeled);
  unl.assign(pool.begin(), pool.begin() + 16);
  b.unlabeled_target = fx.target.samples.select_rows(unl);
  return b;
}

std::string metrics_csv(const std::vector<train::MetricsRecord>& rows) {
  std::ostringstream out;
  train::write_metrics_csv(out, rows);
  return out.str();
}

}  // namespace

TEST(Evaluate, PerfectPredictor) {
  const std::vector<std::size_t> y{0, 1, 2, 1, 0};
  const auto ev = train::evaluate_predictions(y, y, 3);
  EXPECT_EQ(ev.overall, 1.0);
  EXPECT_EQ(ev.mca, 1.0);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      if (i != j) EXPECT_EQ(ev.confusion[i][j], 0u);
}

TEST(Evaluate, ConstantPredictorOnImbalancedSet) {
  std::vector<std::size_t> truth(100, 0);
  for (std::size_t i = 90; i < 100; ++i) truth[i] = 1;
  const std::vector<std::size_t> predicted(100, 0);
  const auto ev = train::evaluate_predictions(predicted, truth, 2);
  EXPECT_NEAR(ev.overall, 0.9, 1e-15);
  EXPECT_NEAR(ev.mca, 0.5, 1e-15);
}

TEST(Evaluate, RandomPredictorNearChance) {
  const std::size_t n = 20000, c = 4;
  Rng rng(5);
  std::vector<std::size_t> truth(n), predicted(n);
  for (std::size_t i = 0; i < n; ++i) {
    truth[i] = rng.below(c);
    predicted[i] = rng.below(c);
  }
  const auto ev = train::evaluate_predictions(predicted, truth, c);
  const double p = 1.0 / c;
  EXPECT_NEAR(ev.overall, p, 3.0 * std::sqrt(p * (1 - p) / n));
}

TEST(Evaluate, ExcludesEmptyClassesFromMca) {
  const std::vector<std::size_t> truth{0, 0, 1, 1}, predicted{0, 1, 1, 1};
  const auto ev = train::evaluate_predictions(predicted, truth, 3);
  EXPECT_EQ(ev.excluded_classes, std::vector<std::size_t>{2});
  EXPECT_NEAR(ev.mca, 0.75, 1e-15);
}

TEST(TrainStep, CeOnlyMatchesPlainSupervisedStep) {
  const Fixture fx = moons();
  TrainConfig cfg;
  cfg.seed = 4;
  cfg.losses = {false, false, false};
  auto state = train::init_state(cfg, fx.source);
  const auto batches = fixed_batches(fx);

  // Plain S+T: CE on source plus weakly augmented labeled target, one SGD step.
  model::Model plain = state.model.clone();
  Rng rng = state.augment_rng;
  const Tensor weak =
      data::augment(batches.labeled_target.x, data::View::A, cfg.augmentation, rng);
  const ad::Var x = ad::concat_rows(ad::constant(batches.source.x), ad::constant(weak));
  std::vector<std::size_t> y = batches.source.labels;
  y.insert(y.end(), batches.labeled_target.labels.begin(), batches.labeled_target.labels.end());
  const ad::Var ce =
      losses::cross_entropy(model::predict(plain.logits(plain.features(x)), 1.0), y);
  plain.zero_grad();
  ad::backward(ce);
  for (auto& p : plain.parameters()) {
    Tensor& v = p.mutable_value();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= cfg.learning_rate * p.grad()[i];
  }
  plain.renormalize_classifier();

  train::train_step(state, batches, cfg);
  const auto got = state.model.parameters(), want = plain.parameters();
  for (std::size_t k = 0; k < got.size(); ++k) EXPECT_EQ(got[k].value(), want[k].value()) << k;
}

TEST(TrainStep, ZeroLambdaGatesInterButPrototypesStillMove) {
  const Fixture fx = moons();
  TrainConfig with_zero;
  with_zero.seed = 6;
  with_zero.lambda1 = 0.0;
  TrainConfig disabled = with_zero;
  disabled.losses.inter = false;
  const auto batches = fixed_batches(fx);

  auto a = train::init_state(with_zero, fx.source);
  auto b = train::init_state(disabled, fx.source);
  const Tensor before = a.prototypes.prototypes;
  train::train_step(a, batches, with_zero);
  train::train_step(b, batches, disabled);
  const auto pa = a.model.parameters(), pb = b.model.parameters();
  for (std::size_t k = 0; k < pa.size(); ++k) EXPECT_EQ(pa[k].value(), pb[k].value());
  EXPECT_NE(a.prototypes.prototypes, before);
  EXPECT_EQ(a.prototypes.update_counts, std::vector<std::size_t>(2, 1));
}

TEST(TrainStep, SmokeRunReducesCrossEntropy) {
  const Fixture fx = moons(200);
  TrainConfig cfg;
  cfg.seed = 7;
  auto state = train::init_state(cfg, fx.source);
  const auto batches = fixed_batches(fx);
  const auto first = train::train_step(state, batches, cfg);
  train::MetricsRecord last;
  for (int i = 1; i < 50; ++i) last = train::train_step(state, batches, cfg);
  EXPECT_EQ(last.iteration, 50u);
  EXPECT_LT(last.loss_ce, first.loss_ce);
}

TEST(TrainStep, RecordsFiniteDiagnostics) {
  const Fixture fx = moons();
  TrainConfig cfg;
  auto state = train::init_state(cfg, fx.source);
  const auto r = train::train_step(state, fixed_batches(fx), cfg);
  EXPECT_GT(r.sinkhorn_iters, 0);
  EXPECT_TRUE(std::isfinite(r.loss_total));
  EXPECT_GE(r.confident_frac, 0.0);
  EXPECT_LE(r.confident_frac, 1.0);
}

TEST(TrainRun, ZeroIterationsEvaluatesInitialModel) {
  const Fixture fx = moons();
  TrainConfig cfg;
  cfg.iterations = 0;
  const auto result = train::train_run(cfg, fx.source, fx.target);
  ASSERT_EQ(result.metrics.size(), 1u);
  EXPECT_EQ(result.metrics[0].iteration, 0u);
  EXPECT_EQ(result.metrics[0].acc_overall, result.final_evaluation.overall);
}

TEST(TrainRun, Deterministic) {
  const Fixture fx = moons();
  TrainConfig cfg;
  cfg.seed = 9;
  cfg.iterations = 30;
  cfg.eval_interval = 10;
  const auto a = train::train_run(cfg, fx.source, fx.target);
  const auto b = train::train_run(cfg, fx.source, fx.target);
  EXPECT_EQ(metrics_csv(a.metrics), metrics_csv(b.metrics));
  EXPECT_EQ(a.metrics.size(), 4u);
  EXPECT_EQ(a.metrics.back().iteration, 30u);
}

TEST(TrainRun, PredictionInvariantsAtEveryCheckpoint) {
  const Fixture fx = moons();
  TrainConfig cfg;
  cfg.iterations = 20;
  const auto r = train::train_run(cfg, fx.source, fx.target);
  const Tensor f = r.state.model.features(ad::constant(fx.target.samples)).value();
  for (std::size_t i = 0; i < f.rows(); ++i) EXPECT_NEAR(row_norm(f.row(i)), 1.0, 1e-6);
  const Tensor p = model::predict(r.state.model.logits(ad::constant(f)), 1.0).value();
  for (std::size_t i = 0; i < p.rows(); ++i) EXPECT_NEAR(p(i, 0) + p(i, 1), 1.0, 1e-12);
}

TEST(TrainRun, NonFiniteInputDiverges) {
  Fixture fx = moons();
  fx.source.samples(0, 0) = std::numeric_limits<double>::quiet_NaN();
  TrainConfig cfg;
  cfg.iterations = 10;
  try {
    train::train_run(cfg, fx.source, fx.target);
    FAIL() << "expected divergence";
  } catch (const train::DivergenceError& e) {
    EXPECT_EQ(e.diagnostic.iteration, 1u);
    EXPECT_FALSE(std::isfinite(e.diagnostic.loss_total));
    ASSERT_EQ(e.history.size(), 1u);  // the iteration-0 evaluation row
    EXPECT_EQ(e.history[0].iteration, 0u);
  }
}

TEST(TrainConfig, Validation) {
  TrainConfig cfg;
  cfg.batch_unlabeled = 0;
  EXPECT_THROW(cfg.validate(), ParameterError);
  cfg = TrainConfig{};
  cfg.tau = 1.5;
  EXPECT_THROW(cfg.validate(), ParameterError);
}

TEST(MetricsCsv, Header) {
  const std::string csv = metrics_csv({train::MetricsRecord{}});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), train::kMetricsHeader);
  EXPECT_EQ(csv.find('\r'), std::string::npos);
}

TEST(EpochSampler, CoversPoolEachEpoch) {
  train::EpochSampler sampler({1, 2, 3, 4, 5}, Rng(3));
  auto first = sampler.next(5);
  std::sort(first.begin(), first.end());
  EXPECT_EQ(first, (std::vector<std::size_t>{1, 2, 3, 4, 5}));
  EXPECT_EQ(sampler.next(12).size(), 12u);
}
