#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mcl/autodiff.hpp"
#include "mcl/rng.hpp"

namespace mcl::model {

enum class ClassifierKind { cosine, linear };

struct ModelConfig {
  std::size_t input_dim = 2;
  std::vector<std::size_t> hidden_dims{32};
  std::size_t feature_dim = 16;
  std::size_t num_classes = 2;
  ClassifierKind classifier = ClassifierKind::cosine;
  double classifier_temperature = 0.05;

  void validate() const;
};

struct DenseLayer {
  ad::Var weight;  // in × out
  ad::Var bias;    // 1 × out
};

// MLP feature extractor: tanh on hidden layers, linear output layer, then row
// L2 normalization.
struct FeatureExtractorParams {
  std::vector<DenseLayer> layers;
};

struct ClassifierParams {
  ClassifierKind kind = ClassifierKind::cosine;
  ad::Var weight;  // C × d, rows kept unit-norm for the cosine head
  ad::Var bias;    // 1 × C, linear head only
  double temperature = 0.05;
};

ad::Var extract_features(const FeatureExtractorParams& params, const ad::Var& x);

// Cosine head: (f Wᵀ) / T. Linear head: f Wᵀ + b.
ad::Var classify(const ClassifierParams& params, const ad::Var& features);

ad::Var predict(const ad::Var& logits, double temperature);

class Model {
 public:
  Model() = default;

  // Glorot-uniform weights, small uniform biases; cosine classifier rows
  // normalized.
  static Model init(const ModelConfig& cfg, Rng& rng);

  const ModelConfig& config() const { return config_; }
  FeatureExtractorParams& extractor() { return extractor_; }
  const FeatureExtractorParams& extractor() const { return extractor_; }
  ClassifierParams& classifier() { return classifier_; }
  const ClassifierParams& classifier() const { return classifier_; }

  ad::Var features(const ad::Var& x) const { return extract_features(extractor_, x); }
  ad::Var logits(const ad::Var& features) const { return classify(classifier_, features); }

  std::vector<ad::Var> parameters() const;
  std::vector<std::pair<std::string, ad::Var>> named_parameters() const;

  void zero_grad();
  void renormalize_classifier();

  // Deep copy: the clone shares no nodes with this model.
  Model clone() const;

  // Argmax class per row, no augmentation, no gradient.
  std::vector<std::size_t> predict_labels(const Tensor& x) const;

 private:
  ModelConfig config_;
  FeatureExtractorParams extractor_;
  ClassifierParams classifier_;
};

}  // namespace mcl::model
