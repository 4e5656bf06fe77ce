#include "mcl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "mcl/log.hpp"

namespace mcl::train {

namespace {

Tensor concat(const Tensor& top, const Tensor& bottom) {
  std::vector<double> values(top.values());
  values.insert(values.end(), bottom.values().begin(), bottom.values().end());
  return Tensor({top.rows() + bottom.rows(), top.cols()}, std::move(values));
}

std::string format_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw ParameterError("lambda1/lambda2 must be >= 0");
  if (!(tau > 0.0 && tau <= 1.0)) throw ParameterError("tau must lie in (0, 1]");
  if (!(pl_temperature > 0.0)) throw ParameterError("pl_temperature must be positive");
  if (batch_source < 1 || batch_labeled < 1 || batch_unlabeled < 1) {
    throw ParameterError("batch sizes must be at least 1");
  }
  if (!(learning_rate > 0.0)) throw ParameterError("learning_rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ParameterError("momentum must lie in [0, 1)");
  if (eval_interval < 1) throw ParameterError("eval_interval must be at least 1");
  if (!(prototype_momentum >= 0.0 && prototype_momentum <= 1.0)) {
    throw ParameterError("prototype_momentum must lie in [0, 1]");
  }
  if (!(heldout_fraction >= 0.0 && heldout_fraction < 1.0)) {
    throw ParameterError("heldout_fraction must lie in [0, 1)");
  }
  ot.validate();
  intra.validate();
  augmentation.validate();
}

EpochSampler::EpochSampler(std::vector<std::size_t> pool, Rng rng)
    : pool_(std::move(pool)), rng_(std::move(rng)) {
  if (pool_.empty()) throw ParameterError("cannot sample batches from an empty pool");
  rng_.shuffle(pool_.begin(), pool_.end());
}

std::vector<std::size_t> EpochSampler::next(std::size_t count) {
  std::vector<std::size_t> out;
  out.reserve(count);
  while (out.size() < count) {
    if (position_ == pool_.size()) {
      rng_.shuffle(pool_.begin(), pool_.end());
      position_ = 0;
    }
    out.push_back(pool_[position_++]);
  }
  return out;
}

TrainState init_state(const TrainConfig& cfg, const data::DomainDataset& source) {
  cfg.validate();
  model::ModelConfig model_cfg = cfg.model;
  model_cfg.input_dim = source.input_dim();
  model_cfg.num_classes = source.num_classes;
  Rng init_rng = Rng::stream(cfg.seed, "init");

  TrainState state;
  state.model = model::Model::init(model_cfg, init_rng);
  state.prototypes = proto::init_from_source(state.model, source, cfg.prototype_momentum);
  for (const ad::Var& p : state.model.parameters()) state.velocity.emplace_back(p.value().shape());
  state.augment_rng = Rng::stream(cfg.seed, "augment");
  return state;
}

MetricsRecord train_step(TrainState& state, const Batches& batches, const TrainConfig& cfg) {
  const model::Model& model = state.model;
  MetricsRecord record;
  record.iteration = state.iteration + 1;

  // (1) Supervised CE on source (no augmentation) and labeled target (weak view).
  Tensor labeled_weak = data::augment(batches.labeled_target.x, data::View::A, cfg.augmentation,
                                      state.augment_rng);
  Tensor supervised_x = concat(batches.source.x, labeled_weak);
  std::vector<std::size_t> supervised_y = batches.source.labels;
  supervised_y.insert(supervised_y.end(), batches.labeled_target.labels.begin(),
                      batches.labeled_target.labels.end());
  if (cfg.ce_target_view != CeTargetView::weak) {
    Tensor labeled_strong = data::augment(batches.labeled_target.x, data::View::B,
                                          cfg.augmentation, state.augment_rng);
    if (cfg.ce_target_view == CeTargetView::strong) {
      supervised_x = concat(batches.source.x, labeled_strong);
    } else {
      supervised_x = concat(supervised_x, labeled_strong);
      supervised_y.insert(supervised_y.end(), batches.labeled_target.labels.begin(),
                          batches.labeled_target.labels.end());
    }
  }
  const ad::Var supervised_features = model.features(ad::constant(supervised_x));
  const ad::Var supervised_probs = model::predict(model.logits(supervised_features), 1.0);
  const ad::Var ce = losses::cross_entropy(supervised_probs, supervised_y);

  // (2) Two views of the unlabeled target batch.
  const Tensor view_a = data::augment(batches.unlabeled_target, data::View::A, cfg.augmentation,
                                      state.augment_rng);
  const Tensor view_b = data::augment(batches.unlabeled_target, data::View::B, cfg.augmentation,
                                      state.augment_rng);
  const ad::Var features_a = model.features(ad::constant(view_a));
  const ad::Var features_b = model.features(ad::constant(view_b));
  const ad::Var logits_a = model.logits(features_a);
  const ad::Var logits_b = model.logits(features_b);

  // (3) Step 1: coupling between the reference and detached view-A features.
  const std::size_t n_source = batches.source.x.rows();
  Tensor reference;
  if (cfg.ot_reference == ot::Reference::prototypes) {
    reference = state.prototypes.prototypes;
  } else {
    std::vector<std::size_t> rows(n_source);
    for (std::size_t i = 0; i < n_source; ++i) rows[i] = i;
    reference = supervised_features.value().select_rows(rows);
  }
  const ot::CostMatrix cost_a = ot::cost_matrix(reference, ad::detach(features_a).value(),
                                                ot::View::A, cfg.ot_reference);
  const ot::CouplingPlan plan =
      ot::solve(cost_a.values, ot::uniform_marginal(reference.rows()),
                ot::uniform_marginal(view_a.rows()), cfg.ot);
  record.sinkhorn_iters = plan.iterations;
  record.marginal_violation = plan.marginal_violation;

  // (4) Step 2: pull view-B features along the fixed coupling.
  const ad::Var inter = ot::inter_loss(plan.gamma, ot::cost_matrix(reference, features_b));

  // (5) Class-wise (or sample-wise) contrastive clustering.
  ad::Var probs_a = model::predict(logits_a, 1.0);
  ad::Var probs_b = model::predict(logits_b, 1.0);
  if (cfg.intra_include_labeled) {
    const Tensor labeled_a = data::augment(batches.labeled_target.x, data::View::A,
                                           cfg.augmentation, state.augment_rng);
    const Tensor labeled_b = data::augment(batches.labeled_target.x, data::View::B,
                                           cfg.augmentation, state.augment_rng);
    probs_a = ad::concat_rows(
        probs_a, model::predict(model.logits(model.features(ad::constant(labeled_a))), 1.0));
    probs_b = ad::concat_rows(
        probs_b, model::predict(model.logits(model.features(ad::constant(labeled_b))), 1.0));
  }
  const ad::Var intra = losses::intra_loss(probs_a, probs_b, cfg.intra);

  // (6) Pseudo labels from the sharpened, detached view A.
  const ad::Var sharpened_a = ad::detach(model::predict(logits_a, cfg.pl_temperature));
  const ad::Var pl = losses::pseudo_label_loss(
      sharpened_a, model::predict(logits_b, 1.0),
      losses::PseudoLabelConfig{cfg.tau, cfg.pl_temperature});
  record.confident_frac = losses::confident_fraction(sharpened_a.value(), cfg.tau);

  // (7) Weighted objective; disabled terms never enter the tape.
  ad::Var total = ce;
  if (cfg.losses.pl) total = ad::add(total, pl);
  if (cfg.losses.inter && cfg.lambda1 != 0.0) {
    total = ad::add(total, ad::scalar_mul(inter, cfg.lambda1));
  }
  if (cfg.losses.intra && cfg.lambda2 != 0.0) {
    total = ad::add(total, ad::scalar_mul(intra, cfg.lambda2));
  }

  record.loss_ce = ce.value().item();
  record.loss_pl = pl.value().item();
  record.loss_inter = inter.value().item();
  record.loss_intra = intra.value().item();
  record.loss_total = total.value().item();
  if (!std::isfinite(record.loss_total)) {
    throw DivergenceError("non-finite total loss at iteration " +
                              std::to_string(record.iteration),
                          record);
  }

  // (8) Backward and SGD with momentum.
  state.model.zero_grad();
  ad::backward(total);
  std::vector<ad::Var> params = state.model.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& velocity = state.velocity[k];
    Tensor& value = params[k].mutable_value();
    const Tensor& grad = params[k].grad();
    for (std::size_t i = 0; i < value.size(); ++i) {
      velocity[i] = cfg.momentum * velocity[i] + grad[i];
      value[i] -= cfg.learning_rate * velocity[i];
    }
  }
  state.model.renormalize_classifier();

  // (9) Prototype EMA from the detached source features of the CE pass.
  std::vector<std::size_t> source_rows(n_source);
  for (std::size_t i = 0; i < n_source; ++i) source_rows[i] = i;
  const Tensor source_features = supervised_features.value().select_rows(source_rows);
  proto::ema_update(state.prototypes,
                    proto::batch_class_means(source_features, batches.source.labels));

  ++state.iteration;
  return record;
}

Evaluation evaluate_predictions(std::span<const std::size_t> predicted,
                                std::span<const std::size_t> truth, std::size_t num_classes) {
  if (predicted.size() != truth.size()) throw DimensionError("evaluate: prediction count differs");
  Evaluation ev;
  ev.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= num_classes || predicted[i] >= num_classes) {
      throw DimensionError("evaluate: class index out of range");
    }
    ++ev.confusion[truth[i]][predicted[i]];
    if (truth[i] == predicted[i]) ++correct;
  }
  ev.overall = truth.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(truth.size());
  double recall_sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::size_t total = 0;
    for (std::size_t v : ev.confusion[c]) total += v;
    if (total == 0) {
      ev.excluded_classes.push_back(c);
      log::warn("evaluate: class " + std::to_string(c) + " has no samples; excluded from MCA");
      continue;
    }
    recall_sum += static_cast<double>(ev.confusion[c][c]) / static_cast<double>(total);
    ++counted;
  }
  ev.mca = counted == 0 ? 0.0 : recall_sum / static_cast<double>(counted);
  return ev;
}

Evaluation evaluate(const model::Model& model, const Tensor& x, std::span<const std::size_t> truth) {
  const std::vector<std::size_t> predicted = model.predict_labels(x);
  return evaluate_predictions(predicted, truth, model.config().num_classes);
}

RunResult train_run(const TrainConfig& cfg, const data::DomainDataset& source,
                    const data::DomainDataset& target) {
  if (target.num_classes != source.num_classes || target.input_dim() != source.input_dim()) {
    throw ParameterError("source and target must share the label space and input dimension");
  }
  if (target.roles.size() != target.size()) throw ParameterError("target roles are missing");

  RunResult result;
  result.state = init_state(cfg, source);

  std::vector<std::size_t> source_pool(source.size());
  for (std::size_t i = 0; i < source_pool.size(); ++i) source_pool[i] = i;
  const std::vector<std::size_t> labeled_pool = target.indices_with_role(data::Role::labeled);
  std::vector<std::size_t> unlabeled_pool = target.indices_with_role(data::Role::unlabeled);
  if (labeled_pool.empty()) throw ParameterError("target has no labeled samples");
  if (unlabeled_pool.empty()) throw ParameterError("target has no unlabeled samples");

  std::vector<std::size_t> eval_pool = unlabeled_pool;
  if (cfg.heldout_fraction > 0.0) {
    Rng split_rng = Rng::stream(cfg.seed, "heldout");
    split_rng.shuffle(unlabeled_pool.begin(), unlabeled_pool.end());
    const auto held = static_cast<std::size_t>(cfg.heldout_fraction *
                                               static_cast<double>(unlabeled_pool.size()));
    if (held == 0 || held == unlabeled_pool.size()) {
      throw ParameterError("heldout_fraction leaves an empty train or evaluation pool");
    }
    eval_pool.assign(unlabeled_pool.begin(), unlabeled_pool.begin() + static_cast<long>(held));
    unlabeled_pool.erase(unlabeled_pool.begin(), unlabeled_pool.begin() + static_cast<long>(held));
    std::sort(eval_pool.begin(), eval_pool.end());
  }
  const Tensor eval_x = target.samples.select_rows(eval_pool);
  std::vector<std::size_t> eval_y(eval_pool.size());
  for (std::size_t i = 0; i < eval_pool.size(); ++i) eval_y[i] = target.labels[eval_pool[i]];

  auto labels_of = [](const data::DomainDataset& ds, const std::vector<std::size_t>& idx) {
    std::vector<std::size_t> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = ds.labels[idx[i]];
    return out;
  };

  EpochSampler source_sampler(source_pool, Rng::stream(cfg.seed, "batches/source"));
  EpochSampler labeled_sampler(labeled_pool, Rng::stream(cfg.seed, "batches/labeled"));
  EpochSampler unlabeled_sampler(unlabeled_pool, Rng::stream(cfg.seed, "batches/unlabeled"));

  auto evaluate_into = [&](MetricsRecord& record) {
    const Evaluation ev = evaluate(result.state.model, eval_x, eval_y);
    record.acc_overall = ev.overall;
    record.acc_mca = ev.mca;
    return ev;
  };

  MetricsRecord initial;
  result.final_evaluation = evaluate_into(initial);
  result.metrics.push_back(initial);

  for (std::size_t t = 1; t <= cfg.iterations; ++t) {
    Batches batches;
    const auto s_idx = source_sampler.next(cfg.batch_source);
    const auto l_idx = labeled_sampler.next(cfg.batch_labeled);
    const auto u_idx = unlabeled_sampler.next(cfg.batch_unlabeled);
    batches.source = {source.samples.select_rows(s_idx), labels_of(source, s_idx)};
    batches.labeled_target = {target.samples.select_rows(l_idx), labels_of(target, l_idx)};
    batches.unlabeled_target = target.samples.select_rows(u_idx);

    MetricsRecord record;
    try {
      record = train_step(result.state, batches, cfg);
    } catch (DivergenceError& e) {
      e.history = result.metrics;
      throw;
    }
    if (t % cfg.eval_interval == 0 || t == cfg.iterations) {
      result.final_evaluation = evaluate_into(record);
      result.metrics.push_back(record);
      log::debug("iter " + std::to_string(t) + " loss " + format_metric(record.loss_total) +
                 " acc " + format_metric(record.acc_overall));
    }
  }
  return result;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRecord>& records) {
  out << kMetricsHeader << '\n';
  for (const MetricsRecord& r : records) {
    out << r.iteration << ',' << format_metric(r.loss_total) << ',' << format_metric(r.loss_ce)
        << ',' << format_metric(r.loss_pl) << ',' << format_metric(r.loss_inter) << ','
        << format_metric(r.loss_intra) << ',' << r.sinkhorn_iters << ','
        << format_metric(r.marginal_violation) << ',' << format_metric(r.acc_overall) << ','
        << format_metric(r.acc_mca) << ',' << format_metric(r.confident_frac) << '\n';
  }
}

std::string to_string(CeTargetView view) {
  switch (view) {
    case CeTargetView::weak: return "weak";
    case CeTargetView::strong: return "strong";
    case CeTargetView::both: return "both";
  }
  return "weak";
}

}  // namespace mcl::train
