#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "mcl/data.hpp"
#include "mcl/trainer.hpp"

namespace mcl::config {

enum class DatasetKind { two_moons, gauss_blobs, csv };

struct DatasetConfig {
  DatasetKind kind = DatasetKind::two_moons;
  // two moons
  std::size_t n_per_domain = 400;
  double noise = 0.1;
  double rotation_degrees = 30.0;
  // gaussian blobs
  std::size_t num_classes = 3;
  std::size_t n_per_class = 100;
  std::size_t input_dim = 2;
  double blob_sigma = 0.5;
  std::vector<double> shift_matrix;  // row-major input_dim²; empty = identity
  std::vector<double> shift_bias;    // input_dim entries; empty = all 1.0
  // csv
  std::string source_csv;
  std::string target_csv;
};

// Fully resolved run description. Every field has a default; only `dataset`
// must be given explicitly.
struct RunConfig {
  DatasetConfig dataset;
  train::TrainConfig train;
  data::ShotSplit shots;  // shots.seed follows `seed`
  std::vector<std::uint64_t> seeds;  // empty = {train.seed}
};

using KeyValues = std::map<std::string, std::string>;

// Parses `key = value` lines; `#` starts a comment. Duplicate keys are an
// error. Unknown keys are rejected by resolve().
KeyValues parse(std::istream& in, const std::string& origin = "<config>");
KeyValues parse_file(const std::string& path);

// Applies `KEY=VALUE` overrides on top of file values.
void apply_overrides(KeyValues& values, const std::vector<std::string>& overrides);

RunConfig resolve(const KeyValues& values);

// Every key with its resolved value, one `key = value` line each, sorted.
std::string echo(const RunConfig& cfg);

const std::vector<std::string>& known_keys();

data::DomainPair build_datasets(const RunConfig& cfg, std::uint64_t seed);

std::vector<std::uint64_t> parse_seed_list(const std::string& text);

}  // namespace mcl::config
