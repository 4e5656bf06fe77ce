#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mcl/data.hpp"
#include "mcl/errors.hpp"
#include "mcl/losses.hpp"
#include "mcl/model.hpp"
#include "mcl/ot.hpp"
#include "mcl/prototypes.hpp"
#include "mcl/rng.hpp"

namespace mcl::train {

struct LossFlags {
  bool inter = true;
  bool intra = true;
  bool pl = true;
};

enum class CeTargetView { weak, strong, both };

struct TrainConfig {
  double lambda1 = 1.0;
  double lambda2 = 0.2;
  double tau = 0.95;
  double pl_temperature = 1.0;
  model::ModelConfig model;  // input_dim and num_classes are taken from the data
  std::size_t batch_source = 32;
  std::size_t batch_labeled = 8;
  std::size_t batch_unlabeled = 32;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t iterations = 2000;
  std::size_t eval_interval = 100;
  std::uint64_t seed = 0;
  ot::SinkhornConfig ot;
  ot::Reference ot_reference = ot::Reference::prototypes;
  losses::IntraConfig intra;
  LossFlags losses;
  double prototype_momentum = proto::kDefaultMomentum;
  data::AugmentationConfig augmentation;
  bool intra_include_labeled = false;
  CeTargetView ce_target_view = CeTargetView::weak;
  // Fraction of the unlabeled target pool held out for inductive evaluation;
  // 0 evaluates transductively on the whole unlabeled pool.
  double heldout_fraction = 0.0;

  void validate() const;
};

struct MetricsRecord {
  std::size_t iteration = 0;
  double loss_total = 0.0;
  double loss_ce = 0.0;
  double loss_pl = 0.0;
  double loss_inter = 0.0;
  double loss_intra = 0.0;
  int sinkhorn_iters = 0;
  double marginal_violation = 0.0;
  double acc_overall = 0.0;
  double acc_mca = 0.0;
  double confident_frac = 0.0;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, MetricsRecord diagnostic)
      : Error(what), diagnostic(diagnostic) {}
  MetricsRecord diagnostic;
  std::vector<MetricsRecord> history;  // rows logged before the failure
};

struct LabeledBatch {
  Tensor x;
  std::vector<std::size_t> labels;
};

struct Batches {
  LabeledBatch source;
  LabeledBatch labeled_target;
  Tensor unlabeled_target;
};

struct TrainState {
  model::Model model;
  proto::PrototypeBank prototypes;
  std::vector<Tensor> velocity;  // one buffer per model parameter
  std::size_t iteration = 0;
  Rng augment_rng;
};

TrainState init_state(const TrainConfig& cfg, const data::DomainDataset& source);

// One alternating MCL iteration: supervised CE, Step 1 coupling on detached
// view-A features, Step 2 alignment of view-B features, class-wise clustering,
// pseudo labels, one SGD-momentum update, then the prototype EMA.
MetricsRecord train_step(TrainState& state, const Batches& batches, const TrainConfig& cfg);

struct Evaluation {
  double overall = 0.0;
  double mca = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [truth][predicted]
  std::vector<std::size_t> excluded_classes;        // classes with no samples
};

Evaluation evaluate_predictions(std::span<const std::size_t> predicted,
                                std::span<const std::size_t> truth, std::size_t num_classes);
Evaluation evaluate(const model::Model& model, const Tensor& x, std::span<const std::size_t> truth);

struct RunResult {
  TrainState state;
  std::vector<MetricsRecord> metrics;
  Evaluation final_evaluation;
};

// `target` must already carry labeled/unlabeled roles.
RunResult train_run(const TrainConfig& cfg, const data::DomainDataset& source,
                    const data::DomainDataset& target);

inline constexpr const char* kMetricsHeader =
    "iter,loss_total,loss_ce,loss_pl,loss_inter,loss_intra,sinkhorn_iters,marginal_violation,"
    "acc_overall,acc_mca,confident_frac";

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRecord>& records);

// Cycles through a pool in seeded random order, reshuffling at each epoch.
class EpochSampler {
 public:
  EpochSampler(std::vector<std::size_t> pool, Rng rng);
  std::vector<std::size_t> next(std::size_t count);

 private:
  std::vector<std::size_t> pool_;
  std::size_t position_ = 0;
  Rng rng_;
};

std::string to_string(CeTargetView view);

}  // namespace mcl::train
