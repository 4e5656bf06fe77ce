#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mcl/rng.hpp"
#include "mcl/tensor.hpp"

namespace mcl::data {

enum class Domain { source, target };
enum class Role { labeled, unlabeled };

std::string to_string(Domain d);
std::string to_string(Role r);

// Samples of one domain. Source datasets are fully labeled; target datasets
// carry a per-sample role after shot selection (ground-truth labels are kept for
// evaluation).
struct DomainDataset {
  Tensor samples;  // n × input_dim
  std::vector<std::size_t> labels;
  Domain domain = Domain::source;
  std::vector<Role> roles;
  std::size_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t input_dim() const { return samples.cols(); }
  std::vector<std::size_t> indices_with_role(Role role) const;
  std::vector<std::size_t> indices_of_class(std::size_t c) const;
};

struct DomainPair {
  DomainDataset source;
  DomainDataset target;
};

// Two interleaved half circles (C = 2) with isotropic Gaussian noise. The target
// domain is drawn from the same generator (independent stream) and rotated by
// `rotation_degrees` about the distribution centroid (0.5, 0.25).
DomainPair gen_two_moons_shift(std::size_t n_per_domain, double noise, double rotation_degrees,
                               std::uint64_t seed);

inline constexpr double kMoonsCentroidX = 0.5;
inline constexpr double kMoonsCentroidY = 0.25;

// C isotropic blobs with centers drawn uniformly from [-3, 3]^d. The target
// domain is shift_matrix * x + shift_bias applied to fresh draws.
DomainPair gen_gauss_blobs_shift(std::size_t num_classes, std::size_t n_per_class,
                                 std::size_t input_dim, const Tensor& shift_matrix,
                                 std::span<const double> shift_bias, double blob_sigma,
                                 std::uint64_t seed);

enum class View { A, B };

struct AugmentationConfig {
  double weak_noise_sigma = 0.03;
  double strong_noise_sigma = 0.15;
  double strong_dropout_prob = 0.2;
  double strong_scale_min = 0.7;
  double strong_scale_max = 1.3;

  void validate() const;
};

// View A: additive N(0, weak²). View B: per-coordinate scale jitter, additive
// N(0, strong²), then independent coordinate zeroing.
Tensor augment(const Tensor& x, View view, const AugmentationConfig& cfg, Rng& rng);

struct ShotSplit {
  std::size_t shots = 3;
  std::uint64_t seed = 0;
};

// Marks exactly `shots` samples per class as labeled (uniform choice without
// replacement); all others become unlabeled.
DomainDataset select_shots(const DomainDataset& target, const ShotSplit& split);

// CSV with header x0,...,x{d-1},label,domain,role and 17 significant digits.
void write_csv(std::ostream& out, const DomainDataset& dataset);
void write_csv_file(const std::string& path, const DomainDataset& dataset);
DomainDataset read_csv(std::istream& in, std::size_t num_classes = 0);
DomainDataset read_csv_file(const std::string& path, std::size_t num_classes = 0);

// Determinant by Gaussian elimination with partial pivoting.
double determinant(const Tensor& square);

}  // namespace mcl::data
