#include "mcl/ablation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

#include "mcl/errors.hpp"

namespace mcl::ablation {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

Grid parse_grid(const std::string& text) {
  if (text == "tab4") return Grid::tab4;
  if (text == "tab5") return Grid::tab5;
  if (text == "all") return Grid::all;
  throw ConfigError("grid must be tab4, tab5 or all, got '" + text + "'");
}

std::vector<Cell> make_cells(const train::TrainConfig& base, Grid grid) {
  std::vector<Cell> cells;
  if (grid != Grid::tab4) {
    struct Row {
      const char* id;
      bool inter, intra, pl;
      const char* description;
    };
    static constexpr Row rows[] = {
        {"tab5_a", false, false, false, "CE only (S+T)"},
        {"tab5_b", true, false, false, "CE + inter"},
        {"tab5_c", false, true, false, "CE + intra"},
        {"tab5_d", false, false, true, "CE + PL"},
        {"tab5_e", true, true, false, "CE + inter + intra"},
        {"tab5_f", true, false, true, "CE + inter + PL"},
        {"tab5_g", false, true, true, "CE + intra + PL"},
        {"tab5_h", true, true, true, "CE + inter + intra + PL (MCL)"},
    };
    for (const Row& r : rows) {
      train::TrainConfig cfg = base;
      cfg.losses = {r.inter, r.intra, r.pl};
      cells.push_back({r.id, r.description, cfg});
    }
  }
  if (grid != Grid::tab5) {
    struct Row {
      const char* id;
      ot::Reference reference;
      losses::IntraVariant variant;
      const char* description;
    };
    static constexpr Row rows[] = {
        {"tab4_standard_sample", ot::Reference::source_batch, losses::IntraVariant::sample_wise,
         "standard OT + sample-wise clustering"},
        {"tab4_standard_class", ot::Reference::source_batch, losses::IntraVariant::class_wise,
         "standard OT + class-wise clustering"},
        {"tab4_proto_sample", ot::Reference::prototypes, losses::IntraVariant::sample_wise,
         "prototype OT + sample-wise clustering"},
        {"tab4_proto_class", ot::Reference::prototypes, losses::IntraVariant::class_wise,
         "prototype OT + class-wise clustering"},
    };
    for (const Row& r : rows) {
      train::TrainConfig cfg = base;
      cfg.losses = {true, true, true};
      cfg.ot_reference = r.reference;
      cfg.intra.variant = r.variant;
      cells.push_back({r.id, r.description, cfg});
    }
  }
  return cells;
}

std::vector<Row> run_grid(const std::vector<Cell>& cells, const DatasetProvider& datasets,
                          const std::vector<std::uint64_t>& seeds, std::size_t jobs) {
  if (seeds.empty()) throw ParameterError("ablation needs at least one seed");
  std::vector<data::DomainPair> pairs;
  pairs.reserve(seeds.size());
  for (std::uint64_t seed : seeds) pairs.push_back(datasets(seed));

  const std::size_t total = cells.size() * seeds.size();
  std::vector<Row> rows(total);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto worker = [&] {
    for (std::size_t k = next++; k < total; k = next++) {
      const Cell& cell = cells[k / seeds.size()];
      const std::size_t s = k % seeds.size();
      try {
        train::TrainConfig cfg = cell.config;
        cfg.seed = seeds[s];
        const auto result = train::train_run(cfg, pairs[s].source, pairs[s].target);
        rows[k] = {cell.config_id, cell.description, seeds[s], result.final_evaluation.overall,
                   result.final_evaluation.mca};
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(jobs, total));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return rows;
}

std::vector<Summary> summarize(const std::vector<Row>& rows) {
  std::vector<Summary> out;
  for (const Row& row : rows) {
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const Summary& s) { return s.config_id == row.config_id; });
    if (it == out.end()) {
      out.push_back({row.config_id, row.description});
      it = out.end() - 1;
    }
    ++it->runs;
    it->mean_overall += row.acc_overall;
    it->mean_mca += row.acc_mca;
  }
  for (Summary& s : out) {
    s.mean_overall /= static_cast<double>(s.runs);
    s.mean_mca /= static_cast<double>(s.runs);
    double var_o = 0.0, var_m = 0.0;
    for (const Row& row : rows) {
      if (row.config_id != s.config_id) continue;
      var_o += (row.acc_overall - s.mean_overall) * (row.acc_overall - s.mean_overall);
      var_m += (row.acc_mca - s.mean_mca) * (row.acc_mca - s.mean_mca);
    }
    // Sample standard deviation; zero for a single run.
    const double denom = s.runs > 1 ? static_cast<double>(s.runs - 1) : 1.0;
    s.std_overall = std::sqrt(var_o / denom);
    s.std_mca = std::sqrt(var_m / denom);
  }
  return out;
}

void write_rows_csv(std::ostream& out, const std::vector<Row>& rows) {
  out << kAblationHeader << '\n';
  for (const Row& r : rows) {
    out << r.config_id << ',' << r.description << ',' << r.seed << ',' << fmt(r.acc_overall) << ','
        << fmt(r.acc_mca) << '\n';
  }
}

void write_summary_csv(std::ostream& out, const std::vector<Summary>& summary) {
  out << kSummaryHeader << '\n';
  for (const Summary& s : summary) {
    out << s.config_id << ',' << s.description << ',' << s.runs << ',' << fmt(s.mean_overall) << ','
        << fmt(s.std_overall) << ',' << fmt(s.mean_mca) << ',' << fmt(s.std_mca) << '\n';
  }
}

}  // namespace mcl::ablation
