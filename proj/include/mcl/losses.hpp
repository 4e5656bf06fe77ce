#pragma once

#include <span>

#include "mcl/autodiff.hpp"

namespace mcl::losses {

enum class IntraVariant { class_wise, sample_wise };

struct IntraConfig {
  double row_sum_floor = 1e-8;
  IntraVariant variant = IntraVariant::class_wise;

  void validate() const;
};

struct PseudoLabelConfig {
  double threshold = 0.95;
  double temperature = 1.0;

  void validate() const;
};

// Mean over the batch of -log p[label], log floored at 1e-12.
ad::Var cross_entropy(const ad::Var& probabilities, std::span<const std::size_t> labels);

// Class-wise contrastive clustering. With L = P_Aᵀ P_B (C × C) and phi dividing
// each row by (row sum + floor):
//   (1 / 2C) (|phi(L) - I|_1 + |phi(Lᵀ) - I|_1)
// Dispatches to the sample-wise variant when cfg.variant says so.
ad::Var intra_loss(const ad::Var& p_a, const ad::Var& p_b, const IntraConfig& cfg = {});

// Same formula on the n × n matrix P_A P_Bᵀ with normalizer 1 / 2n.
ad::Var intra_loss_samplewise(const ad::Var& p_a, const ad::Var& p_b, const IntraConfig& cfg = {});

// Thresholded pseudo-label loss. `p_a_sharpened` must be detached; its argmax
// is the pseudo label and its max is compared to the threshold. Mean over all
// rows; unconfident rows contribute 0.
ad::Var pseudo_label_loss(const ad::Var& p_a_sharpened, const ad::Var& p_b,
                          const PseudoLabelConfig& cfg = {});

// Fraction of rows whose max probability reaches the threshold.
double confident_fraction(const Tensor& p_a_sharpened, double threshold);

ad::Var total_loss(const ad::Var& ce, const ad::Var& pl, const ad::Var& inter,
                   const ad::Var& intra, double lambda1, double lambda2);

}  // namespace mcl::losses
