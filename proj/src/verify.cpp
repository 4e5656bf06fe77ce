#include "mcl/verify.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>

#include "mcl/data.hpp"
#include "mcl/prototypes.hpp"
#include "mcl/trainer.hpp"

namespace mcl::verify {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

Tensor random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t = Tensor::zeros(rows, cols);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

Tensor random_unit_rows(Rng& rng, std::size_t rows, std::size_t cols) {
  Tensor t = Tensor::zeros(rows, cols);
  for (double& v : t.data()) v = rng.normal();
  return normalize_rows(t);
}

CheckResult check(std::string group, std::string name, bool passed, std::string detail) {
  return {std::move(group), std::move(name), passed, std::move(detail)};
}

// Worst report over several random instances of one gradient check.
GradientCase repeated(std::string name, std::size_t instances,
                      std::function<ad::GradCheckReport(Rng&)> one) {
  return {name, [name, instances, one] {
            ad::GradCheckReport worst;
            Rng rng = Rng::stream(1, "verify/" + name);
            for (std::size_t k = 0; k < instances; ++k) {
              const auto r = one(rng);
              worst.evaluations += r.evaluations;
              if (!(r.max_relative_error <= worst.max_relative_error)) {
                worst.max_relative_error = r.max_relative_error;
                worst.worst_index = r.worst_index;
              }
            }
            worst.passed = worst.max_relative_error <= 1e-4;
            return worst;
          }};
}

GradientCase unary_case(std::string name, std::size_t instances,
                        std::function<ad::Var(const ad::Var&)> op, double lo = -1.0,
                        double hi = 1.0) {
  return repeated(name, instances, [op, lo, hi](Rng& rng) {
    const Tensor x = random_matrix(rng, 3, 4, lo, hi);
    return ad::grad_check(
        [&](const ad::Var& v) {
          const ad::Var y = op(v);
          // Random projection so every output entry matters.
          Rng proj(7);
          return ad::frobenius_inner(random_matrix(proj, y.rows(), y.cols()), y);
        },
        x);
  });
}

}  // namespace

std::vector<CheckResult> sinkhorn_oracle_checks(std::size_t instances) {
  std::vector<CheckResult> out;
  Rng rng = Rng::stream(11, "verify/sinkhorn");
  ot::SinkhornConfig cfg;
  cfg.mode = ot::SinkhornMode::balanced;
  cfg.epsilon = 0.001;
  cfg.max_iters = 200000;
  cfg.tolerance = 1e-12;

  double worst_gap = 0.0, worst_below = 0.0, worst_violation = 0.0;
  for (std::size_t k = 0; k < instances; ++k) {
    const std::size_t n = 3 + k % 4;
    const Tensor a = random_unit_rows(rng, n, 3);
    const Tensor b = random_unit_rows(rng, n, 3);
    const Tensor cost = ot::cost_matrix(a, b).values;
    const auto mu = ot::uniform_marginal(n);
    const auto plan = ot::sinkhorn_balanced(cost, mu, mu, cfg);
    const double exact = ot::exact_ot_bruteforce(cost);
    const double entropic = ot::transport_cost(plan.gamma, cost);
    worst_gap = std::max(worst_gap, std::fabs(entropic - exact));
    worst_below = std::max(worst_below, exact - entropic);
    worst_violation = std::max(worst_violation, plan.marginal_violation);
  }
  out.push_back(check("sinkhorn", "balanced_vs_bruteforce", worst_gap <= 1e-3,
                      "max |cost - exact| = " + fmt(worst_gap)));
  out.push_back(check("sinkhorn", "never_below_exact", worst_below <= 1e-9,
                      "max (exact - cost) = " + fmt(worst_below)));
  out.push_back(check("sinkhorn", "marginals", worst_violation <= 1e-6,
                      "max violation = " + fmt(worst_violation)));
  return out;
}

std::vector<CheckResult> unbalanced_limit_checks(std::size_t instances) {
  Rng rng = Rng::stream(12, "verify/unbalanced");
  double worst_entry = 0.0;
  for (std::size_t k = 0; k < instances; ++k) {
    const std::size_t n = 3 + k % 4, m = 2 + k % 5;
    const Tensor cost = ot::cost_matrix(random_unit_rows(rng, n, 4), random_unit_rows(rng, m, 4)).values;
    ot::SinkhornConfig bal;
    bal.mode = ot::SinkhornMode::balanced;
    bal.tolerance = 1e-12;
    bal.max_iters = 100000;
    ot::SinkhornConfig unb = bal;
    unb.mode = ot::SinkhornMode::unbalanced;
    unb.rho = 1e6;
    const auto p = ot::sinkhorn_balanced(cost, ot::uniform_marginal(n), ot::uniform_marginal(m), bal);
    const auto q = ot::sinkhorn_unbalanced(cost, ot::uniform_marginal(n), ot::uniform_marginal(m), unb);
    for (std::size_t i = 0; i < p.gamma.size(); ++i)
      worst_entry = std::max(worst_entry, std::fabs(p.gamma[i] - q.gamma[i]));
  }
  return {check("sinkhorn", "unbalanced_limit", worst_entry <= 1e-4,
                "max entry gap at rho=1e6 over " + std::to_string(instances) +
                    " instances = " + fmt(worst_entry))};
}

std::vector<CheckResult> closed_form_checks() {
  std::vector<CheckResult> out;
  for (std::size_t c : {2u, 3u, 5u}) {
    const std::size_t n = 100;
    const ad::Var uniform = ad::constant(Tensor::filled(n, c, 1.0 / static_cast<double>(c)));
    const double u = losses::intra_loss(uniform, uniform).value().item();
    const double expected_u = 2.0 * static_cast<double>(c - 1) / static_cast<double>(c);
    out.push_back(check("closed_form", "intra_uniform_C" + std::to_string(c),
                        std::fabs(u - expected_u) <= 1e-9, "value " + fmt(u)));

    Tensor balanced = Tensor::zeros(n, c);
    for (std::size_t i = 0; i < n; ++i) balanced(i, i % c) = 1.0;
    const double b = losses::intra_loss(ad::constant(balanced), ad::constant(balanced)).value().item();
    out.push_back(check("closed_form", "intra_balanced_onehot_C" + std::to_string(c), b <= 1e-6,
                        "value " + fmt(b)));

    Tensor collapsed = Tensor::zeros(n, c);
    for (std::size_t i = 0; i < n; ++i) collapsed(i, 0) = 1.0;
    const double col =
        losses::intra_loss(ad::constant(collapsed), ad::constant(collapsed)).value().item();
    const double expected_col = static_cast<double>(c - 1) / static_cast<double>(c);
    out.push_back(check("closed_form", "intra_collapsed_C" + std::to_string(c),
                        std::fabs(col - expected_col) <= 1e-6, "value " + fmt(col)));
  }
  const ad::Var unconfident = ad::constant(Tensor::from_rows({{0.9, 0.1}, {0.5, 0.5}, {0.94, 0.06}}));
  const double pl = losses::pseudo_label_loss(unconfident, unconfident).value().item();
  out.push_back(check("closed_form", "pl_below_threshold", pl == 0.0, "value " + fmt(pl)));

  const ad::Var p = ad::constant(Tensor::from_rows({{1.0, 0.0}, {0.5, 0.5}}));
  const std::vector<std::size_t> y{0, 0};
  const double ce = losses::cross_entropy(p, y).value().item();
  out.push_back(check("closed_form", "cross_entropy_mean", std::fabs(ce - std::log(2.0) / 2) <= 1e-12,
                      "value " + fmt(ce)));

  proto::PrototypeBank bank{Tensor::from_rows({{1.0, 0.0}}), 0.9, {0}};
  proto::ema_update(bank, {{0, {0.0, 1.0}}});
  const double norm = std::sqrt(0.82);
  const bool ema_ok = std::fabs(bank.prototypes(0, 0) - 0.9 / norm) <= 1e-12 &&
                      std::fabs(bank.prototypes(0, 1) - 0.1 / norm) <= 1e-12;
  out.push_back(check("closed_form", "prototype_ema", ema_ok,
                      "h = [" + fmt(bank.prototypes(0, 0)) + ", " + fmt(bank.prototypes(0, 1)) + "]"));
  return out;
}

std::vector<CheckResult> separation_checks() {
  std::vector<CheckResult> out;
  const LossFixture fx = LossFixture::random(3);

  // Step 2 loss with a differentiable view A and prototypes present as leaves.
  const ad::Var view_a_features = ad::parameter(fx.model.features(ad::constant(fx.view_a)).value());
  const ad::Var prototypes = ad::parameter(fx.prototypes);
  const Tensor cost_a =
      ot::cost_matrix(prototypes.value(), ad::detach(view_a_features).value()).values;
  ot::SinkhornConfig cfg;
  const auto plan = ot::solve(cost_a, ot::uniform_marginal(cost_a.rows()),
                              ot::uniform_marginal(cost_a.cols()), cfg);
  const ad::Var features_b = fx.model.features(ad::constant(fx.view_b));
  const ad::Var inter =
      ot::inter_loss(plan.gamma, ot::cost_matrix(ad::detach(prototypes).value(), features_b));
  ad::backward(inter);
  double leak = 0.0;
  for (double g : view_a_features.grad().data()) leak = std::max(leak, std::fabs(g));
  for (double g : prototypes.grad().data()) leak = std::max(leak, std::fabs(g));
  out.push_back(check("step_separation", "inter_view_a_and_prototypes", leak == 0.0,
                      "max |grad| = " + fmt(leak)));

  const ad::Var logits_a = ad::parameter(fx.model.logits(fx.model.features(ad::constant(fx.view_a))).value());
  const ad::Var pl = losses::pseudo_label_loss(
      ad::detach(model::predict(logits_a, fx.pl.temperature)), fx.probs(fx.view_b), fx.pl);
  ad::backward(pl);
  double pl_leak = 0.0;
  for (double g : logits_a.grad().data()) pl_leak = std::max(pl_leak, std::fabs(g));
  out.push_back(check("step_separation", "pl_view_a_logits", pl_leak == 0.0,
                      "max |grad| = " + fmt(pl_leak)));
  return out;
}

std::vector<CheckResult> determinism_checks() {
  auto once = [] {
    const auto pair = data::gen_two_moons_shift(120, 0.1, 30.0, 5);
    const auto target = data::select_shots(pair.target, {3, 5});
    train::TrainConfig cfg;
    cfg.seed = 5;
    cfg.iterations = 20;
    cfg.eval_interval = 10;
    const auto result = train::train_run(cfg, pair.source, target);
    std::ostringstream out;
    train::write_metrics_csv(out, result.metrics);
    return out.str();
  };
  const bool same = once() == once();
  return {check("determinism", "train_run_metrics", same, same ? "identical" : "differs")};
}

LossFixture LossFixture::random(std::uint64_t seed, std::size_t n, std::size_t num_classes,
                                std::size_t feature_dim, std::size_t input_dim) {
  Rng rng = Rng::stream(seed, "verify/fixture");
  LossFixture fx;
  model::ModelConfig cfg;
  cfg.input_dim = input_dim;
  cfg.hidden_dims = {6};
  cfg.feature_dim = feature_dim;
  cfg.num_classes = num_classes;
  fx.model = model::Model::init(cfg, rng);
  fx.source_x = random_matrix(rng, n, input_dim, -2.0, 2.0);
  fx.source_y.resize(n);
  for (std::size_t i = 0; i < n; ++i) fx.source_y[i] = rng.below(num_classes);
  fx.view_a = random_matrix(rng, n, input_dim, -2.0, 2.0);
  fx.view_b = fx.view_a;
  for (double& v : fx.view_b.data()) v += 0.3 * rng.normal();
  fx.prototypes = random_unit_rows(rng, num_classes, feature_dim);
  const Tensor cost = ot::cost_matrix(fx.prototypes, fx.model.features(ad::constant(fx.view_a)).value()).values;
  fx.gamma = ot::solve(cost, ot::uniform_marginal(num_classes), ot::uniform_marginal(n),
                       ot::SinkhornConfig{})
                 .gamma;
  return fx;
}

ad::Var LossFixture::probs(const Tensor& x, double temperature) const {
  return model::predict(model.logits(model.features(ad::constant(x))), temperature);
}

ad::Var LossFixture::cross_entropy() const { return losses::cross_entropy(probs(source_x), source_y); }

ad::Var LossFixture::inter() const {
  return ot::inter_loss(gamma, ot::cost_matrix(prototypes, model.features(ad::constant(view_b))));
}

ad::Var LossFixture::intra(losses::IntraVariant variant) const {
  losses::IntraConfig cfg;
  cfg.variant = variant;
  return losses::intra_loss(probs(view_a), probs(view_b), cfg);
}

ad::Var LossFixture::pseudo_label() const {
  return losses::pseudo_label_loss(ad::detach(probs(view_a, pl.temperature)), probs(view_b), pl);
}

ad::Var LossFixture::total() const {
  return losses::total_loss(cross_entropy(), pseudo_label(), inter(),
                            intra(losses::IntraVariant::class_wise), lambda1, lambda2);
}

std::vector<GradientCase> builtin_gradient_cases(std::size_t instances) {
  std::vector<GradientCase> cases;
  cases.push_back(unary_case("tanh", instances, [](const ad::Var& x) { return ad::tanh(x); }));
  cases.push_back(unary_case("log", instances, [](const ad::Var& x) { return ad::log(x); }, 0.1, 2.0));
  cases.push_back(unary_case("abs", instances, [](const ad::Var& x) { return ad::abs(x); }));
  cases.push_back(unary_case("relu", instances, [](const ad::Var& x) { return ad::relu(x); }));
  cases.push_back(unary_case("transpose", instances, [](const ad::Var& x) { return ad::transpose(x); }));
  cases.push_back(unary_case("row_sum", instances, [](const ad::Var& x) { return ad::row_sum(x); }));
  cases.push_back(unary_case("mean", instances, [](const ad::Var& x) { return ad::mean(x); }));
  cases.push_back(unary_case("softmax_rows", instances,
                             [](const ad::Var& x) { return ad::softmax_rows(x, 1.25); }));
  cases.push_back(unary_case("l2_normalize_rows", instances,
                             [](const ad::Var& x) { return ad::l2_normalize_rows(x); }));
  cases.push_back(unary_case("normalize_row_sums", instances,
                             [](const ad::Var& x) { return ad::normalize_row_sums(x, 1e-8); },
                             0.1, 1.0));
  cases.push_back(unary_case("select_columns", instances, [](const ad::Var& x) {
    const std::size_t cols[] = {2, 0};
    return ad::select_columns(x, cols);
  }));
  cases.push_back(unary_case("scalar_ops", instances, [](const ad::Var& x) {
    return ad::add_scalar(ad::scalar_mul(x, -2.5), 0.75);
  }));
  cases.push_back(unary_case("binary_ops", instances, [](const ad::Var& x) {
    const ad::Var y = ad::tanh(x);
    return ad::elementwise_mul(ad::subtract(ad::add(x, y), ad::scalar_mul(y, 0.5)), x);
  }));
  cases.push_back(unary_case("matmul", instances, [](const ad::Var& x) {
    return ad::matmul(x, ad::transpose(ad::tanh(x)));
  }));
  cases.push_back(unary_case("add_row_vector_concat", instances, [](const ad::Var& x) {
    const std::size_t first[] = {0};
    const ad::Var bias = ad::transpose(ad::select_columns(ad::transpose(x), first));
    return ad::concat_rows(ad::add_row_vector(x, bias), x);
  }));

  auto model_case = [instances](std::string name, std::function<ad::Var(const LossFixture&)> loss) {
    return repeated(name, instances, [loss](Rng& rng) {
      const LossFixture fx = LossFixture::random(rng.next_u64());
      return ad::grad_check_params([&] { return loss(fx); }, fx.model.parameters());
    });
  };
  cases.push_back(model_case("loss_ce", [](const LossFixture& fx) { return fx.cross_entropy(); }));
  cases.push_back(model_case("loss_inter", [](const LossFixture& fx) { return fx.inter(); }));
  cases.push_back(model_case("loss_intra_class_wise", [](const LossFixture& fx) {
    return fx.intra(losses::IntraVariant::class_wise);
  }));
  cases.push_back(model_case("loss_intra_sample_wise", [](const LossFixture& fx) {
    return fx.intra(losses::IntraVariant::sample_wise);
  }));
  cases.push_back(model_case("loss_pl", [](const LossFixture& fx) { return fx.pseudo_label(); }));
  cases.push_back(model_case("loss_total", [](const LossFixture& fx) { return fx.total(); }));
  return cases;
}

std::vector<CheckResult> run(const Options& options) {
  std::vector<CheckResult> results;
  auto cases = builtin_gradient_cases(options.gradient_instances);
  cases.insert(cases.end(), options.extra_gradient_cases.begin(), options.extra_gradient_cases.end());
  for (const GradientCase& c : cases) {
    const ad::GradCheckReport r = c.run();
    results.push_back(check("gradients", c.name, r.passed,
                            "max rel err " + fmt(r.max_relative_error) + " over " +
                                std::to_string(r.evaluations) + " evaluations"));
  }
  for (auto& r : sinkhorn_oracle_checks(options.sinkhorn_instances)) results.push_back(std::move(r));
  for (auto& r : unbalanced_limit_checks(options.sinkhorn_instances)) results.push_back(std::move(r));
  for (auto& r : closed_form_checks()) results.push_back(std::move(r));
  for (auto& r : separation_checks()) results.push_back(std::move(r));
  for (auto& r : determinism_checks()) results.push_back(std::move(r));
  return results;
}

int report(std::ostream& out, const std::vector<CheckResult>& results) {
  std::map<std::string, std::pair<std::size_t, std::size_t>> groups;  // passed, total
  std::vector<std::string> order;
  bool all = true;
  for (const CheckResult& r : results) {
    out << (r.passed ? "[PASS] " : "[FAIL] ") << r.group << '/' << r.name << "  " << r.detail << '\n';
    if (!groups.count(r.group)) order.push_back(r.group);
    auto& [passed, total] = groups[r.group];
    passed += r.passed ? 1 : 0;
    ++total;
    all = all && r.passed;
  }
  out << "--\n";
  for (const std::string& g : order) {
    out << g << ": " << groups[g].first << "/" << groups[g].second << " passed\n";
  }
  out << (all ? "verify: all checks passed" : "verify: FAILED") << '\n';
  return all ? 0 : 1;
}

}  // namespace mcl::verify
