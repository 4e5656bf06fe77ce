#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "mcl/data.hpp"
#include "mcl/trainer.hpp"

namespace mcl::ablation {

enum class Grid { tab4, tab5, all };

Grid parse_grid(const std::string& text);

struct Cell {
  std::string config_id;
  std::string description;
  train::TrainConfig config;
};

// Loss-component grid (rows a..h: every on/off combination of inter, intra,
// pseudo-label, CE always on) followed by the framework-design grid
// ({source-batch OT, prototype OT} x {sample-wise, class-wise}, all losses on).
std::vector<Cell> make_cells(const train::TrainConfig& base, Grid grid);

struct Row {
  std::string config_id;
  std::string description;
  std::uint64_t seed = 0;
  double acc_overall = 0.0;
  double acc_mca = 0.0;
};

struct Summary {
  std::string config_id;
  std::string description;
  std::size_t runs = 0;
  double mean_overall = 0.0;
  double std_overall = 0.0;
  double mean_mca = 0.0;
  double std_mca = 0.0;
};

// Datasets (source, target with shot roles) for one seed.
using DatasetProvider = std::function<data::DomainPair(std::uint64_t seed)>;

// Runs every cell over every seed. Cells run on up to `jobs` threads; rows are
// returned in (cell, seed) order regardless of scheduling.
std::vector<Row> run_grid(const std::vector<Cell>& cells, const DatasetProvider& datasets,
                          const std::vector<std::uint64_t>& seeds, std::size_t jobs = 1);

std::vector<Summary> summarize(const std::vector<Row>& rows);

inline constexpr const char* kAblationHeader = "config_id,description,seed,acc_overall,acc_mca";
inline constexpr const char* kSummaryHeader =
    "config_id,description,runs,mean_overall,std_overall,mean_mca,std_mca";

void write_rows_csv(std::ostream& out, const std::vector<Row>& rows);
void write_summary_csv(std::ostream& out, const std::vector<Summary>& summary);

}  // namespace mcl::ablation
