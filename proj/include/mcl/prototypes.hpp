#pragma once

#include <map>
#include <span>
#include <vector>

#include "mcl/data.hpp"
#include "mcl/model.hpp"
#include "mcl/tensor.hpp"

namespace mcl::proto {

inline constexpr double kDefaultMomentum = 0.9;
inline constexpr double kPrototypeNormFloor = 1e-12;

// Source class prototypes: C × d unit-norm rows maintained by momentum updates.
// Prototypes are constants for every loss; they never enter a gradient tape.
struct PrototypeBank {
  Tensor prototypes;
  double momentum = kDefaultMomentum;
  std::vector<std::size_t> update_counts;

  std::size_t num_classes() const { return prototypes.rows(); }
};

using ClassMeans = std::map<std::size_t, std::vector<double>>;

PrototypeBank init_from_source(const model::Model& model, const data::DomainDataset& source,
                               double momentum = kDefaultMomentum);

// Per-class mean feature for the classes present in the batch.
ClassMeans batch_class_means(const Tensor& features, std::span<const std::size_t> labels);

// h <- m h + (1 - m) mean, then renormalize. Classes absent from `means` are
// untouched.
void ema_update(PrototypeBank& bank, const ClassMeans& means);

}  // namespace mcl::proto
