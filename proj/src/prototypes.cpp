#include "mcl/prototypes.hpp"

#include <cmath>

#include "mcl/errors.hpp"

namespace mcl::proto {

PrototypeBank init_from_source(const model::Model& model, const data::DomainDataset& source,
                               double momentum) {
  if (!(momentum >= 0.0 && momentum <= 1.0)) {
    throw ParameterError("prototype momentum must lie in [0, 1]");
  }
  const std::size_t num_classes = model.config().num_classes;
  const Tensor features = model.features(ad::constant(source.samples)).value();
  const std::size_t d = features.cols();

  PrototypeBank bank;
  bank.momentum = momentum;
  bank.prototypes = Tensor::zeros(num_classes, d);
  bank.update_counts.assign(num_classes, 0);
  std::vector<std::size_t> counts(num_classes, 0);
  for (std::size_t i = 0; i < source.size(); ++i) {
    const std::size_t c = source.labels[i];
    if (c >= num_classes) throw ParameterError("source label out of range");
    ++counts[c];
    for (std::size_t j = 0; j < d; ++j) bank.prototypes(c, j) += features(i, j);
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (counts[c] == 0) {
      throw MissingClassError("class " + std::to_string(c) + " has no source samples");
    }
    auto row = bank.prototypes.row(c);
    for (double& v : row) v /= static_cast<double>(counts[c]);
    const double norm = row_norm(row);
    if (norm < kPrototypeNormFloor) {
      throw DegeneratePrototypeError("class " + std::to_string(c) + " source mean is zero");
    }
    for (double& v : row) v /= norm;
  }
  return bank;
}

ClassMeans batch_class_means(const Tensor& features, std::span<const std::size_t> labels) {
  ClassMeans means;
  if (labels.empty()) return means;
  if (features.rows() != labels.size()) {
    throw DimensionError("batch_class_means: feature rows and labels differ");
  }
  std::map<std::size_t, std::size_t> counts;
  const std::size_t d = features.cols();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& mean = means[labels[i]];
    mean.resize(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) mean[j] += features(i, j);
    ++counts[labels[i]];
  }
  for (auto& [c, mean] : means) {
    for (double& v : mean) v /= static_cast<double>(counts[c]);
  }
  return means;
}

void ema_update(PrototypeBank& bank, const ClassMeans& means) {
  if (bank.prototypes.empty()) throw ContractError("ema_update on an uninitialized bank");
  const double m = bank.momentum;
  const std::size_t d = bank.prototypes.cols();
  for (const auto& [c, mean] : means) {
    if (c >= bank.num_classes()) throw ParameterError("ema_update: class index out of range");
    if (mean.size() != d) throw DimensionError("ema_update: mean has wrong dimension");
    std::vector<double> updated(d);
    for (std::size_t j = 0; j < d; ++j) updated[j] = m * bank.prototypes(c, j) + (1.0 - m) * mean[j];
    const double norm = row_norm(updated);
    if (norm < kPrototypeNormFloor) {
      throw DegeneratePrototypeError("prototype " + std::to_string(c) + " collapsed to zero");
    }
    auto row = bank.prototypes.row(c);
    for (std::size_t j = 0; j < d; ++j) row[j] = updated[j] / norm;
    ++bank.update_counts[c];
  }
}

}  // namespace mcl::proto
