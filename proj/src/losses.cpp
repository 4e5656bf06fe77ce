#include "mcl/losses.hpp"

#include <algorithm>

#include "mcl/errors.hpp"

namespace mcl::losses {

namespace {

void require_same_shape(const ad::Var& a, const ad::Var& b, const char* what) {
  if (!a.value().same_shape(b.value())) {
    throw DimensionError(std::string(what) + ": prediction shapes differ " +
                         shape_string(a.value().shape()) + " vs " +
                         shape_string(b.value().shape()));
  }
}

// (1 / 2k) (|phi(L) - I|_1 + |phi(Lᵀ) - I|_1) for a square k × k correlation.
ad::Var dual_normalized_gap(const ad::Var& correlation, double floor) {
  const std::size_t k = correlation.rows();
  const ad::Var identity = ad::constant(Tensor::identity(k));
  const ad::Var rows = ad::normalize_row_sums(correlation, floor);
  const ad::Var cols = ad::normalize_row_sums(ad::transpose(correlation), floor);
  const ad::Var gap = ad::add(ad::sum(ad::abs(ad::subtract(rows, identity))),
                              ad::sum(ad::abs(ad::subtract(cols, identity))));
  return ad::scalar_mul(gap, 1.0 / (2.0 * static_cast<double>(k)));
}

}  // namespace

void IntraConfig::validate() const {
  if (!(row_sum_floor > 0.0)) throw ParameterError("intra: row_sum_floor must be positive");
}

void PseudoLabelConfig::validate() const {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw ParameterError("pseudo label: threshold must lie in (0, 1]");
  }
  if (!(temperature > 0.0)) throw ParameterError("pseudo label: temperature must be positive");
}

ad::Var cross_entropy(const ad::Var& probabilities, std::span<const std::size_t> labels) {
  const std::size_t n = probabilities.rows(), c = probabilities.cols();
  if (labels.size() != n) throw DimensionError("cross_entropy: label count differs from batch size");
  Tensor one_hot = Tensor::zeros(n, c);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= c) throw DimensionError("cross_entropy: label out of range");
    one_hot(i, labels[i]) = 1.0;
  }
  return ad::scalar_mul(ad::frobenius_inner(one_hot, ad::log(probabilities)),
                        -1.0 / static_cast<double>(n));
}

ad::Var intra_loss(const ad::Var& p_a, const ad::Var& p_b, const IntraConfig& cfg) {
  if (cfg.variant == IntraVariant::sample_wise) return intra_loss_samplewise(p_a, p_b, cfg);
  cfg.validate();
  require_same_shape(p_a, p_b, "intra_loss");
  return dual_normalized_gap(ad::matmul(ad::transpose(p_a), p_b), cfg.row_sum_floor);
}

ad::Var intra_loss_samplewise(const ad::Var& p_a, const ad::Var& p_b, const IntraConfig& cfg) {
  cfg.validate();
  require_same_shape(p_a, p_b, "intra_loss_samplewise");
  return dual_normalized_gap(ad::matmul(p_a, ad::transpose(p_b)), cfg.row_sum_floor);
}

ad::Var pseudo_label_loss(const ad::Var& p_a_sharpened, const ad::Var& p_b,
                          const PseudoLabelConfig& cfg) {
  cfg.validate();
  require_same_shape(p_a_sharpened, p_b, "pseudo_label_loss");
  if (p_a_sharpened.requires_grad()) {
    throw ContractError("pseudo_label_loss: view-A predictions must be detached");
  }
  const Tensor& pa = p_a_sharpened.value();
  const std::size_t n = pa.rows(), c = pa.cols();
  Tensor targets = Tensor::zeros(n, c);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = pa.row(i);
    const auto best = std::max_element(row.begin(), row.end());
    if (*best >= cfg.threshold) targets(i, static_cast<std::size_t>(best - row.begin())) = 1.0;
  }
  return ad::scalar_mul(ad::frobenius_inner(targets, ad::log(p_b)),
                        -1.0 / static_cast<double>(n));
}

double confident_fraction(const Tensor& p_a_sharpened, double threshold) {
  const std::size_t n = p_a_sharpened.rows();
  std::size_t confident = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = p_a_sharpened.row(i);
    if (*std::max_element(row.begin(), row.end()) >= threshold) ++confident;
  }
  return static_cast<double>(confident) / static_cast<double>(n);
}

ad::Var total_loss(const ad::Var& ce, const ad::Var& pl, const ad::Var& inter,
                   const ad::Var& intra, double lambda1, double lambda2) {
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) {
    throw ParameterError("total_loss: loss weights must be non-negative");
  }
  return ad::add(ad::add(ce, pl),
                 ad::add(ad::scalar_mul(inter, lambda1), ad::scalar_mul(intra, lambda2)));
}

}  // namespace mcl::losses
