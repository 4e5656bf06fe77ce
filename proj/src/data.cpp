#include "mcl/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "mcl/errors.hpp"

namespace mcl::data {

std::string to_string(Domain d) { return d == Domain::source ? "source" : "target"; }
std::string to_string(Role r) { return r == Role::labeled ? "labeled" : "unlabeled"; }

std::vector<std::size_t> DomainDataset::indices_with_role(Role role) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < roles.size(); ++i)
    if (roles[i] == role) out.push_back(i);
  return out;
}

std::vector<std::size_t> DomainDataset::indices_of_class(std::size_t c) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == c) out.push_back(i);
  return out;
}

namespace {

DomainDataset draw_moons(std::size_t n, double noise, Rng& rng, Domain domain) {
  DomainDataset ds;
  ds.samples = Tensor::zeros(n, 2);
  ds.labels.resize(n);
  ds.roles.assign(n, Role::labeled);
  ds.domain = domain;
  ds.num_classes = 2;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % 2;
    const double t = rng.uniform(0.0, std::numbers::pi);
    double x = label == 0 ? std::cos(t) : 1.0 - std::cos(t);
    double y = label == 0 ? std::sin(t) : 0.5 - std::sin(t);
    x += noise * rng.normal();
    y += noise * rng.normal();
    ds.samples(i, 0) = x;
    ds.samples(i, 1) = y;
    ds.labels[i] = label;
  }
  return ds;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

DomainPair gen_two_moons_shift(std::size_t n_per_domain, double noise, double rotation_degrees,
                               std::uint64_t seed) {
  if (n_per_domain < 4) throw ParameterError("two moons: n_per_domain must be at least 2C = 4");
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw ParameterError("two moons: noise must be >= 0");
  if (!(rotation_degrees >= 0.0 && rotation_degrees < 360.0)) {
    throw ParameterError("two moons: rotation must lie in [0, 360)");
  }
  Rng source_rng = Rng::stream(seed, "data/source");
  Rng target_rng = Rng::stream(seed, "data/target");
  DomainPair pair{draw_moons(n_per_domain, noise, source_rng, Domain::source),
                  draw_moons(n_per_domain, noise, target_rng, Domain::target)};

  const double theta = rotation_degrees * std::numbers::pi / 180.0;
  const double c = std::cos(theta), s = std::sin(theta);
  Tensor& xt = pair.target.samples;
  for (std::size_t i = 0; i < xt.rows(); ++i) {
    const double dx = xt(i, 0) - kMoonsCentroidX;
    const double dy = xt(i, 1) - kMoonsCentroidY;
    xt(i, 0) = kMoonsCentroidX + c * dx - s * dy;
    xt(i, 1) = kMoonsCentroidY + s * dx + c * dy;
  }
  pair.target.roles.assign(xt.rows(), Role::unlabeled);
  return pair;
}

double determinant(const Tensor& square) {
  if (square.rank() != 2 || square.rows() != square.cols()) {
    throw DimensionError("determinant of a non-square matrix");
  }
  Tensor a = square;
  const std::size_t n = a.rows();
  double det = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t pivot = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::fabs(a(i, k)) > std::fabs(a(pivot, k))) pivot = i;
    if (a(pivot, k) == 0.0) return 0.0;
    if (pivot != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(pivot, j));
      det = -det;
    }
    det *= a(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double factor = a(i, k) / a(k, k);
      for (std::size_t j = k; j < n; ++j) a(i, j) -= factor * a(k, j);
    }
  }
  return det;
}

DomainPair gen_gauss_blobs_shift(std::size_t num_classes, std::size_t n_per_class,
                                 std::size_t input_dim, const Tensor& shift_matrix,
                                 std::span<const double> shift_bias, double blob_sigma,
                                 std::uint64_t seed) {
  if (num_classes < 2) throw ParameterError("gauss blobs: need at least 2 classes");
  if (n_per_class < 1 || input_dim < 1) throw ParameterError("gauss blobs: empty dataset");
  if (!(blob_sigma >= 0.0)) throw ParameterError("gauss blobs: blob_sigma must be >= 0");
  if (shift_matrix.rank() != 2 || shift_matrix.rows() != input_dim ||
      shift_matrix.cols() != input_dim) {
    throw ParameterError("gauss blobs: shift_matrix must be input_dim x input_dim");
  }
  if (shift_bias.size() != input_dim) throw ParameterError("gauss blobs: shift_bias has wrong size");
  const double det = determinant(shift_matrix);
  if (!(std::fabs(det) > 1e-12)) throw ParameterError("gauss blobs: shift_matrix is singular");

  Rng center_rng = Rng::stream(seed, "data/centers");
  Tensor centers = Tensor::zeros(num_classes, input_dim);
  for (double& v : centers.data()) v = center_rng.uniform(-3.0, 3.0);

  auto draw = [&](Rng& rng, Domain domain) {
    const std::size_t n = num_classes * n_per_class;
    DomainDataset ds;
    ds.samples = Tensor::zeros(n, input_dim);
    ds.labels.resize(n);
    ds.roles.assign(n, domain == Domain::source ? Role::labeled : Role::unlabeled);
    ds.domain = domain;
    ds.num_classes = num_classes;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t label = i % num_classes;
      ds.labels[i] = label;
      for (std::size_t j = 0; j < input_dim; ++j)
        ds.samples(i, j) = centers(label, j) + blob_sigma * rng.normal();
    }
    return ds;
  };

  Rng source_rng = Rng::stream(seed, "data/source");
  Rng target_rng = Rng::stream(seed, "data/target");
  DomainPair pair{draw(source_rng, Domain::source), draw(target_rng, Domain::target)};

  Tensor& xt = pair.target.samples;
  std::vector<double> row(input_dim);
  for (std::size_t i = 0; i < xt.rows(); ++i) {
    for (std::size_t r = 0; r < input_dim; ++r) {
      double s = shift_bias[r];
      for (std::size_t c = 0; c < input_dim; ++c) s += shift_matrix(r, c) * xt(i, c);
      row[r] = s;
    }
    std::copy(row.begin(), row.end(), xt.row(i).begin());
  }
  return pair;
}

void AugmentationConfig::validate() const {
  if (!(weak_noise_sigma >= 0.0) || !(strong_noise_sigma >= 0.0)) {
    throw ParameterError("augmentation: noise sigmas must be >= 0");
  }
  if (!(strong_dropout_prob >= 0.0 && strong_dropout_prob < 1.0)) {
    throw ParameterError("augmentation: dropout probability must lie in [0, 1)");
  }
  if (!(strong_scale_min > 0.0 && strong_scale_min <= strong_scale_max)) {
    throw ParameterError("augmentation: scale range must be positive and ordered");
  }
}

Tensor augment(const Tensor& x, View view, const AugmentationConfig& cfg, Rng& rng) {
  cfg.validate();
  Tensor out = x;
  if (view == View::A) {
    if (cfg.weak_noise_sigma > 0.0) {
      for (double& v : out.data()) v += cfg.weak_noise_sigma * rng.normal();
    }
    return out;
  }
  for (double& v : out.data()) {
    const double scale = cfg.strong_scale_min == cfg.strong_scale_max
                             ? cfg.strong_scale_min
                             : rng.uniform(cfg.strong_scale_min, cfg.strong_scale_max);
    v *= scale;
    if (cfg.strong_noise_sigma > 0.0) v += cfg.strong_noise_sigma * rng.normal();
    if (cfg.strong_dropout_prob > 0.0 && rng.uniform() < cfg.strong_dropout_prob) v = 0.0;
  }
  return out;
}

DomainDataset select_shots(const DomainDataset& target, const ShotSplit& split) {
  if (split.shots < 1) throw SplitError("shots must be at least 1");
  DomainDataset out = target;
  out.roles.assign(target.size(), Role::unlabeled);
  Rng rng = Rng::stream(split.seed, "shots");
  for (std::size_t c = 0; c < target.num_classes; ++c) {
    std::vector<std::size_t> members = target.indices_of_class(c);
    if (members.size() < split.shots) {
      throw SplitError("class " + std::to_string(c) + " has " + std::to_string(members.size()) +
                       " target samples, fewer than " + std::to_string(split.shots) + " shots");
    }
    // Partial Fisher-Yates: the first `shots` entries are a uniform draw
    // without replacement.
    for (std::size_t k = 0; k < split.shots; ++k) {
      const std::size_t j = k + rng.below(members.size() - k);
      std::swap(members[k], members[j]);
      out.roles[members[k]] = Role::labeled;
    }
  }
  return out;
}

void write_csv(std::ostream& out, const DomainDataset& dataset) {
  const std::size_t d = dataset.input_dim();
  for (std::size_t j = 0; j < d; ++j) out << 'x' << j << ',';
  out << "label,domain,role\n";
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) out << format_double(dataset.samples(i, j)) << ',';
    out << dataset.labels[i] << ',' << to_string(dataset.domain) << ','
        << to_string(dataset.roles[i]) << '\n';
  }
}

void write_csv_file(const std::string& path, const DomainDataset& dataset) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_csv(out, dataset);
  if (!out) throw IoError("failed writing " + path);
}

DomainDataset read_csv(std::istream& in, std::size_t num_classes) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("dataset CSV is empty");
  const auto header = split_csv_line(line);
  if (header.size() < 4 || header[header.size() - 3] != "label" ||
      header[header.size() - 2] != "domain" || header.back() != "role") {
    throw IoError("dataset CSV header must be x0,...,label,domain,role");
  }
  const std::size_t d = header.size() - 3;
  std::vector<double> values;
  DomainDataset ds;
  bool first = true;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw IoError("dataset CSV line " + std::to_string(line_no) + " has wrong field count");
    }
    try {
      for (std::size_t j = 0; j < d; ++j) values.push_back(std::stod(fields[j]));
      ds.labels.push_back(static_cast<std::size_t>(std::stoul(fields[d])));
    } catch (const std::exception&) {
      throw IoError("dataset CSV line " + std::to_string(line_no) + " is not numeric");
    }
    const Domain domain = fields[d + 1] == "source" ? Domain::source : Domain::target;
    if (fields[d + 1] != "source" && fields[d + 1] != "target") {
      throw IoError("dataset CSV line " + std::to_string(line_no) + ": unknown domain");
    }
    if (fields[d + 2] != "labeled" && fields[d + 2] != "unlabeled") {
      throw IoError("dataset CSV line " + std::to_string(line_no) + ": unknown role");
    }
    if (first) ds.domain = domain;
    first = false;
    ds.roles.push_back(fields[d + 2] == "labeled" ? Role::labeled : Role::unlabeled);
  }
  if (ds.labels.empty()) throw IoError("dataset CSV has no rows");
  ds.samples = Tensor({ds.labels.size(), d}, std::move(values));
  const std::size_t max_label = *std::max_element(ds.labels.begin(), ds.labels.end());
  ds.num_classes = std::max(num_classes, max_label + 1);
  return ds;
}

DomainDataset read_csv_file(const std::string& path, std::size_t num_classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return read_csv(in, num_classes);
}

}  // namespace mcl::data
