#include "mcl/model.hpp"

#include <algorithm>
#include <cmath>

#include "mcl/errors.hpp"

namespace mcl::model {

void ModelConfig::validate() const {
  if (input_dim == 0 || feature_dim == 0) throw ParameterError("model: dimensions must be positive");
  if (num_classes < 2) throw ParameterError("model: need at least 2 classes");
  if (std::any_of(hidden_dims.begin(), hidden_dims.end(), [](std::size_t h) { return h == 0; })) {
    throw ParameterError("model: hidden layer sizes must be positive");
  }
  if (!(classifier_temperature > 0.0)) {
    throw ParameterError("model: classifier temperature must be positive");
  }
}

ad::Var extract_features(const FeatureExtractorParams& params, const ad::Var& x) {
  ad::Var h = x;
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    const DenseLayer& layer = params.layers[k];
    h = ad::add_row_vector(ad::matmul(h, layer.weight), layer.bias);
    if (k + 1 < params.layers.size()) h = ad::tanh(h);
  }
  return ad::l2_normalize_rows(h);
}

ad::Var classify(const ClassifierParams& params, const ad::Var& features) {
  ad::Var scores = ad::matmul(features, ad::transpose(params.weight));
  if (params.kind == ClassifierKind::cosine) return ad::scalar_mul(scores, 1.0 / params.temperature);
  return ad::add_row_vector(scores, params.bias);
}

ad::Var predict(const ad::Var& logits, double temperature) {
  return ad::softmax_rows(logits, temperature);
}

Model Model::init(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  Model m;
  m.config_ = cfg;

  auto glorot = [&rng](std::size_t rows, std::size_t cols, std::size_t fan_in, std::size_t fan_out) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor w = Tensor::zeros(rows, cols);
    for (double& v : w.data()) v = rng.uniform(-a, a);
    return w;
  };

  std::vector<std::size_t> dims{cfg.input_dim};
  dims.insert(dims.end(), cfg.hidden_dims.begin(), cfg.hidden_dims.end());
  dims.push_back(cfg.feature_dim);
  // Biases uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    Tensor weight = glorot(dims[k], dims[k + 1], dims[k], dims[k + 1]);
    Tensor bias = Tensor::zeros(1, dims[k + 1]);
    const double b = 1.0 / std::sqrt(static_cast<double>(dims[k]));
    for (double& v : bias.data()) v = rng.uniform(-b, b);
    m.extractor_.layers.push_back({ad::parameter(std::move(weight)), ad::parameter(std::move(bias))});
  }

  m.classifier_.kind = cfg.classifier;
  m.classifier_.temperature = cfg.classifier_temperature;
  m.classifier_.weight =
      ad::parameter(glorot(cfg.num_classes, cfg.feature_dim, cfg.feature_dim, cfg.num_classes));
  if (cfg.classifier == ClassifierKind::linear) {
    m.classifier_.bias = ad::parameter(Tensor::zeros(1, cfg.num_classes));
  }
  m.renormalize_classifier();
  return m;
}

std::vector<ad::Var> Model::parameters() const {
  std::vector<ad::Var> out;
  for (const auto& [name, p] : named_parameters()) out.push_back(p);
  return out;
}

std::vector<std::pair<std::string, ad::Var>> Model::named_parameters() const {
  std::vector<std::pair<std::string, ad::Var>> out;
  for (std::size_t k = 0; k < extractor_.layers.size(); ++k) {
    out.emplace_back("extractor." + std::to_string(k) + ".weight", extractor_.layers[k].weight);
    out.emplace_back("extractor." + std::to_string(k) + ".bias", extractor_.layers[k].bias);
  }
  out.emplace_back("classifier.weight", classifier_.weight);
  if (classifier_.kind == ClassifierKind::linear) out.emplace_back("classifier.bias", classifier_.bias);
  return out;
}

void Model::zero_grad() {
  for (ad::Var& p : parameters()) p.zero_grad();
}

void Model::renormalize_classifier() {
  if (classifier_.kind != ClassifierKind::cosine) return;
  classifier_.weight.mutable_value() = normalize_rows(classifier_.weight.value());
}

Model Model::clone() const {
  Model m;
  m.config_ = config_;
  for (const DenseLayer& layer : extractor_.layers) {
    m.extractor_.layers.push_back(
        {ad::parameter(layer.weight.value()), ad::parameter(layer.bias.value())});
  }
  m.classifier_.kind = classifier_.kind;
  m.classifier_.temperature = classifier_.temperature;
  m.classifier_.weight = ad::parameter(classifier_.weight.value());
  if (classifier_.bias.valid()) m.classifier_.bias = ad::parameter(classifier_.bias.value());
  return m;
}

std::vector<std::size_t> Model::predict_labels(const Tensor& x) const {
  const Tensor scores = logits(features(ad::constant(x))).value();
  std::vector<std::size_t> out(scores.rows());
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    const auto row = scores.row(i);
    out[i] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

}  // namespace mcl::model
