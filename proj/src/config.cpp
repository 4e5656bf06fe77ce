#include "mcl/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>

#include "mcl/errors.hpp"

namespace mcl::config {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Shortest text that parses back to the same double.
std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double to_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a number, got '" + text + "'");
  }
}

std::uint64_t to_uint(const std::string& key, const std::string& text) {
  try {
    if (text.empty() || text.front() == '-') throw std::invalid_argument(text);
    std::size_t used = 0;
    const unsigned long long v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + text + "'");
  }
}

bool to_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError("key '" + key + "': expected true/false, got '" + text + "'");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> to_doubles(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) out.push_back(to_double(key, item));
  return out;
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_floating_point_v<T>) {
      out += fmt(values[i]);
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

std::string to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::two_moons: return "two_moons";
    case DatasetKind::gauss_blobs: return "gauss_blobs";
    case DatasetKind::csv: return "csv";
  }
  return "two_moons";
}

struct KeySpec {
  std::string name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define MCL_DOUBLE_KEY(name, field)                                                       \
  KeySpec {                                                                               \
    name, [](RunConfig& c, const std::string& v) { c.field = to_double(name, v); },       \
        [](const RunConfig& c) { return fmt(c.field); }                                   \
  }
#define MCL_SIZE_KEY(name, field)                                                         \
  KeySpec {                                                                               \
    name,                                                                                 \
        [](RunConfig& c, const std::string& v) {                                          \
          c.field = static_cast<std::size_t>(to_uint(name, v));                           \
        },                                                                                \
        [](const RunConfig& c) { return std::to_string(c.field); }                        \
  }
#define MCL_BOOL_KEY(name, field)                                                         \
  KeySpec {                                                                               \
    name, [](RunConfig& c, const std::string& v) { c.field = to_bool(name, v); },         \
        [](const RunConfig& c) { return std::string(c.field ? "true" : "false"); }        \
  }

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs = {
      {"dataset",
       [](RunConfig& c, const std::string& v) {
         if (v == "two_moons") c.dataset.kind = DatasetKind::two_moons;
         else if (v == "gauss_blobs") c.dataset.kind = DatasetKind::gauss_blobs;
         else if (v == "csv") c.dataset.kind = DatasetKind::csv;
         else throw ConfigError("key 'dataset': expected two_moons|gauss_blobs|csv, got '" + v + "'");
       },
       [](const RunConfig& c) { return to_string(c.dataset.kind); }},
      {"seed",
       [](RunConfig& c, const std::string& v) { c.train.seed = to_uint("seed", v); },
       [](const RunConfig& c) { return std::to_string(c.train.seed); }},
      {"seeds",
       [](RunConfig& c, const std::string& v) { c.seeds = parse_seed_list(v); },
       [](const RunConfig& c) { return join(c.seeds); }},
      MCL_SIZE_KEY("shots", shots.shots),
      MCL_SIZE_KEY("n_per_domain", dataset.n_per_domain),
      MCL_DOUBLE_KEY("noise", dataset.noise),
      MCL_DOUBLE_KEY("rotation_degrees", dataset.rotation_degrees),
      MCL_SIZE_KEY("num_classes", dataset.num_classes),
      MCL_SIZE_KEY("n_per_class", dataset.n_per_class),
      MCL_SIZE_KEY("input_dim", dataset.input_dim),
      MCL_DOUBLE_KEY("blob_sigma", dataset.blob_sigma),
      {"shift_matrix",
       [](RunConfig& c, const std::string& v) { c.dataset.shift_matrix = to_doubles("shift_matrix", v); },
       [](const RunConfig& c) { return join(c.dataset.shift_matrix); }},
      {"shift_bias",
       [](RunConfig& c, const std::string& v) { c.dataset.shift_bias = to_doubles("shift_bias", v); },
       [](const RunConfig& c) { return join(c.dataset.shift_bias); }},
      {"source_csv", [](RunConfig& c, const std::string& v) { c.dataset.source_csv = v; },
       [](const RunConfig& c) { return c.dataset.source_csv; }},
      {"target_csv", [](RunConfig& c, const std::string& v) { c.dataset.target_csv = v; },
       [](const RunConfig& c) { return c.dataset.target_csv; }},
      MCL_DOUBLE_KEY("weak_noise_sigma", train.augmentation.weak_noise_sigma),
      MCL_DOUBLE_KEY("strong_noise_sigma", train.augmentation.strong_noise_sigma),
      MCL_DOUBLE_KEY("strong_dropout_prob", train.augmentation.strong_dropout_prob),
      MCL_DOUBLE_KEY("strong_scale_min", train.augmentation.strong_scale_min),
      MCL_DOUBLE_KEY("strong_scale_max", train.augmentation.strong_scale_max),
      {"hidden_dims",
       [](RunConfig& c, const std::string& v) {
         c.train.model.hidden_dims.clear();
         for (const auto& item : split_list(v)) {
           c.train.model.hidden_dims.push_back(static_cast<std::size_t>(to_uint("hidden_dims", item)));
         }
       },
       [](const RunConfig& c) { return join(c.train.model.hidden_dims); }},
      MCL_SIZE_KEY("feature_dim", train.model.feature_dim),
      {"classifier",
       [](RunConfig& c, const std::string& v) {
         if (v == "cosine") c.train.model.classifier = model::ClassifierKind::cosine;
         else if (v == "linear") c.train.model.classifier = model::ClassifierKind::linear;
         else throw ConfigError("key 'classifier': expected cosine|linear, got '" + v + "'");
       },
       [](const RunConfig& c) {
         return std::string(c.train.model.classifier == model::ClassifierKind::cosine ? "cosine"
                                                                                      : "linear");
       }},
      MCL_DOUBLE_KEY("classifier_temperature", train.model.classifier_temperature),
      MCL_DOUBLE_KEY("lambda1", train.lambda1),
      MCL_DOUBLE_KEY("lambda2", train.lambda2),
      MCL_DOUBLE_KEY("tau", train.tau),
      MCL_DOUBLE_KEY("pl_temperature", train.pl_temperature),
      MCL_SIZE_KEY("batch_source", train.batch_source),
      MCL_SIZE_KEY("batch_labeled", train.batch_labeled),
      MCL_SIZE_KEY("batch_unlabeled", train.batch_unlabeled),
      MCL_DOUBLE_KEY("learning_rate", train.learning_rate),
      MCL_DOUBLE_KEY("momentum", train.momentum),
      MCL_SIZE_KEY("iterations", train.iterations),
      MCL_SIZE_KEY("eval_interval", train.eval_interval),
      MCL_DOUBLE_KEY("ot_epsilon", train.ot.epsilon),
      {"ot_max_iters",
       [](RunConfig& c, const std::string& v) {
         const auto n = to_uint("ot_max_iters", v);
         if (n > 100000000) throw ConfigError("key 'ot_max_iters': value too large");
         c.train.ot.max_iters = static_cast<int>(n);
       },
       [](const RunConfig& c) { return std::to_string(c.train.ot.max_iters); }},
      MCL_DOUBLE_KEY("ot_tolerance", train.ot.tolerance),
      {"ot_mode",
       [](RunConfig& c, const std::string& v) {
         if (v == "balanced") c.train.ot.mode = ot::SinkhornMode::balanced;
         else if (v == "unbalanced") c.train.ot.mode = ot::SinkhornMode::unbalanced;
         else throw ConfigError("key 'ot_mode': expected balanced|unbalanced, got '" + v + "'");
       },
       [](const RunConfig& c) { return ot::to_string(c.train.ot.mode); }},
      MCL_DOUBLE_KEY("ot_rho", train.ot.rho),
      {"ot_reference",
       [](RunConfig& c, const std::string& v) {
         if (v == "prototypes") c.train.ot_reference = ot::Reference::prototypes;
         else if (v == "source_batch") c.train.ot_reference = ot::Reference::source_batch;
         else throw ConfigError("key 'ot_reference': expected prototypes|source_batch, got '" + v + "'");
       },
       [](const RunConfig& c) { return ot::to_string(c.train.ot_reference); }},
      {"intra_variant",
       [](RunConfig& c, const std::string& v) {
         if (v == "class_wise") c.train.intra.variant = losses::IntraVariant::class_wise;
         else if (v == "sample_wise") c.train.intra.variant = losses::IntraVariant::sample_wise;
         else throw ConfigError("key 'intra_variant': expected class_wise|sample_wise, got '" + v + "'");
       },
       [](const RunConfig& c) {
         return std::string(c.train.intra.variant == losses::IntraVariant::class_wise
                                ? "class_wise"
                                : "sample_wise");
       }},
      MCL_DOUBLE_KEY("intra_row_sum_floor", train.intra.row_sum_floor),
      MCL_BOOL_KEY("intra_include_labeled", train.intra_include_labeled),
      MCL_BOOL_KEY("use_inter", train.losses.inter),
      MCL_BOOL_KEY("use_intra", train.losses.intra),
      MCL_BOOL_KEY("use_pl", train.losses.pl),
      MCL_DOUBLE_KEY("prototype_momentum", train.prototype_momentum),
      {"ce_target_view",
       [](RunConfig& c, const std::string& v) {
         if (v == "weak") c.train.ce_target_view = train::CeTargetView::weak;
         else if (v == "strong") c.train.ce_target_view = train::CeTargetView::strong;
         else if (v == "both") c.train.ce_target_view = train::CeTargetView::both;
         else throw ConfigError("key 'ce_target_view': expected weak|strong|both, got '" + v + "'");
       },
       [](const RunConfig& c) { return train::to_string(c.train.ce_target_view); }},
      MCL_DOUBLE_KEY("heldout_fraction", train.heldout_fraction),
  };
  return specs;
}

#undef MCL_DOUBLE_KEY
#undef MCL_SIZE_KEY
#undef MCL_BOOL_KEY

}  // namespace

KeyValues parse(std::istream& in, const std::string& origin) {
  KeyValues values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
    if (!values.emplace(key, value).second) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
  }
  return values;
}

KeyValues parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  return parse(in, path);
}

void apply_overrides(KeyValues& values, const std::vector<std::string>& overrides) {
  for (const std::string& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + item + "' is not KEY=VALUE");
    const std::string key = trim(item.substr(0, eq));
    if (key.empty()) throw ConfigError("override '" + item + "' has an empty key");
    values[key] = trim(item.substr(eq + 1));
  }
}

RunConfig resolve(const KeyValues& values) {
  if (values.find("dataset") == values.end()) {
    throw ConfigError("missing required key 'dataset'");
  }
  const auto& specs = key_specs();
  RunConfig cfg;
  for (const auto& [key, value] : values) {
    const auto it = std::find_if(specs.begin(), specs.end(),
                                 [&](const KeySpec& s) { return s.name == key; });
    if (it == specs.end()) throw ConfigError("unknown config key '" + key + "'");
    it->set(cfg, value);
  }
  cfg.shots.seed = cfg.train.seed;
  if (cfg.dataset.kind == DatasetKind::csv &&
      (cfg.dataset.source_csv.empty() || cfg.dataset.target_csv.empty())) {
    throw ConfigError("dataset = csv requires 'source_csv' and 'target_csv'");
  }
  try {
    cfg.train.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  if (cfg.shots.shots < 1) throw ConfigError("key 'shots' must be at least 1");
  return cfg;
}

std::string echo(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> lines;
  for (const KeySpec& spec : key_specs()) lines.emplace_back(spec.name, spec.get(cfg));
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (const auto& [k, v] : lines) out += k + " = " + v + "\n";
  return out;
}

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const KeySpec& spec : key_specs()) k.push_back(spec.name);
    return k;
  }();
  return keys;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& item : split_list(text)) seeds.push_back(to_uint("seeds", item));
  if (seeds.empty()) throw ConfigError("seed list is empty");
  return seeds;
}

data::DomainPair build_datasets(const RunConfig& cfg, std::uint64_t seed) {
  const DatasetConfig& d = cfg.dataset;
  const data::ShotSplit split{cfg.shots.shots, seed};
  data::DomainPair pair;
  switch (d.kind) {
    case DatasetKind::two_moons:
      pair = data::gen_two_moons_shift(d.n_per_domain, d.noise, d.rotation_degrees, seed);
      break;
    case DatasetKind::gauss_blobs: {
      Tensor shift = Tensor::identity(d.input_dim);
      if (!d.shift_matrix.empty()) {
        if (d.shift_matrix.size() != d.input_dim * d.input_dim) {
          throw ConfigError("key 'shift_matrix' needs input_dim^2 entries");
        }
        shift = Tensor({d.input_dim, d.input_dim}, d.shift_matrix);
      }
      std::vector<double> bias = d.shift_bias.empty() ? std::vector<double>(d.input_dim, 1.0)
                                                      : d.shift_bias;
      pair = data::gen_gauss_blobs_shift(d.num_classes, d.n_per_class, d.input_dim, shift, bias,
                                         d.blob_sigma, seed);
      break;
    }
    case DatasetKind::csv: {
      pair.source = data::read_csv_file(d.source_csv);
      pair.target = data::read_csv_file(d.target_csv);
      const std::size_t c = std::max(pair.source.num_classes, pair.target.num_classes);
      pair.source.num_classes = pair.target.num_classes = c;
      pair.source.domain = data::Domain::source;
      pair.target.domain = data::Domain::target;
      pair.source.roles.assign(pair.source.size(), data::Role::labeled);
      if (!pair.target.indices_with_role(data::Role::labeled).empty()) return pair;
      break;
    }
  }
  pair.target = data::select_shots(pair.target, split);
  return pair;
}

}  // namespace mcl::config
