#include "mcl/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "mcl/ablation.hpp"
#include "mcl/checkpoint.hpp"
#include "mcl/config.hpp"
#include "mcl/errors.hpp"
#include "mcl/log.hpp"
#include "mcl/verify.hpp"

namespace fs = std::filesystem;

namespace mcl::cli {

namespace {

config::RunConfig load(const Invocation& inv) {
  config::KeyValues values;
  if (!inv.config_path.empty()) values = config::parse_file(inv.config_path);
  std::vector<std::string> overrides = inv.overrides;
  if (!inv.seeds.empty()) overrides.push_back("seeds=" + inv.seeds);
  config::apply_overrides(values, overrides);
  return config::resolve(values);
}

std::vector<std::uint64_t> seed_list(const config::RunConfig& cfg) {
  if (cfg.seeds.empty()) return {cfg.train.seed};
  return cfg.seeds;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

void write_metrics(const fs::path& path, const std::vector<train::MetricsRecord>& rows) {
  auto out = open_out(path);
  train::write_metrics_csv(out, rows);
}

struct SeedOutcome {
  std::uint64_t seed = 0;
  train::Evaluation evaluation;
};

SeedOutcome train_one(const config::RunConfig& rc, std::uint64_t seed, const fs::path& dir) {
  make_dir(dir);
  config::RunConfig seeded = rc;
  seeded.train.seed = seed;
  seeded.shots.seed = seed;
  const data::DomainPair pair = config::build_datasets(seeded, seed);
  try {
    const train::RunResult result = train::train_run(seeded.train, pair.source, pair.target);
    write_metrics(dir / "metrics.csv", result.metrics);

    NamedTensors tensors;
    for (const auto& [name, var] : result.state.model.named_parameters()) {
      tensors.emplace_back(name, var.value());
    }
    tensors.emplace_back("prototypes", result.state.prototypes.prototypes);
    save_checkpoint_file((dir / "final.ckpt").string(), tensors);

    auto summary = open_out(dir / "summary.txt");
    summary << "seed = " << seed << "\n"
            << "acc_overall = " << num(result.final_evaluation.overall) << "\n"
            << "acc_mca = " << num(result.final_evaluation.mca) << "\n"
            << "\n# resolved config\n"
            << config::echo(seeded);
    return {seed, result.final_evaluation};
  } catch (const train::DivergenceError& e) {
    std::vector<train::MetricsRecord> rows = e.history;
    rows.push_back(e.diagnostic);
    write_metrics(dir / "metrics.csv", rows);
    throw;
  }
}

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

template <class F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const train::DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace

int cmd_generate(const Invocation& inv) {
  return guarded([&] {
    if (inv.out.empty()) throw ConfigError("generate needs --out PREFIX");
    const config::RunConfig rc = load(inv);
    const std::uint64_t seed = seed_list(rc).front();
    const data::DomainPair pair = config::build_datasets(rc, seed);
    const fs::path prefix(inv.out);
    if (prefix.has_parent_path()) make_dir(prefix.parent_path());
    {
      auto out = open_out(inv.out + "_source.csv");
      data::write_csv(out, pair.source);
    }
    {
      auto out = open_out(inv.out + "_target.csv");
      data::write_csv(out, pair.target);
    }
    log::info("wrote " + inv.out + "_source.csv and " + inv.out + "_target.csv");
    return kExitOk;
  });
}

int cmd_train(const Invocation& inv) {
  return guarded([&] {
    if (inv.out.empty()) throw ConfigError("train needs --out DIR");
    const config::RunConfig rc = load(inv);
    const auto seeds = seed_list(rc);
    const fs::path out(inv.out);
    make_dir(out);
    if (seeds.size() == 1) {
      const SeedOutcome r = train_one(rc, seeds.front(), out);
      std::cout << "acc_overall " << num(r.evaluation.overall) << " acc_mca "
                << num(r.evaluation.mca) << "\n";
      return kExitOk;
    }

    std::vector<double> overall, mca;
    std::ostringstream per_seed;
    for (std::uint64_t seed : seeds) {
      const SeedOutcome r = train_one(rc, seed, out / ("seed_" + std::to_string(seed)));
      overall.push_back(r.evaluation.overall);
      mca.push_back(r.evaluation.mca);
      per_seed << "seed " << seed << ": acc_overall = " << num(r.evaluation.overall)
               << ", acc_mca = " << num(r.evaluation.mca) << "\n";
    }
    const auto [mo, so] = mean_std(overall);
    const auto [mm, sm] = mean_std(mca);
    auto summary = open_out(out / "summary.txt");
    summary << "seeds = " << seeds.size() << "\n"
            << "acc_overall = " << num(mo) << " +- " << num(so) << "\n"
            << "acc_mca = " << num(mm) << " +- " << num(sm) << "\n\n"
            << per_seed.str() << "\n# resolved config\n"
            << config::echo(rc);
    std::cout << "acc_overall " << num(mo) << " +- " << num(so) << " acc_mca " << num(mm)
              << " +- " << num(sm) << "\n";
    return kExitOk;
  });
}

int cmd_ablate(const Invocation& inv) {
  return guarded([&] {
    if (inv.out.empty()) throw ConfigError("ablate needs --out DIR");
    if (inv.jobs < 1) throw ConfigError("--jobs must be at least 1");
    const config::RunConfig rc = load(inv);
    const auto cells = ablation::make_cells(rc.train, ablation::parse_grid(inv.grid));
    const auto seeds = seed_list(rc);
    const fs::path out(inv.out);
    make_dir(out / "cells");

    const auto rows = ablation::run_grid(
        cells, [&](std::uint64_t seed) { return config::build_datasets(rc, seed); }, seeds,
        inv.jobs);

    // Per-cell files first, then the merged table.
    for (const auto& cell : cells) {
      std::vector<ablation::Row> mine;
      for (const auto& r : rows) {
        if (r.config_id == cell.config_id) mine.push_back(r);
      }
      auto f = open_out(out / "cells" / (cell.config_id + ".csv"));
      ablation::write_rows_csv(f, mine);
    }
    {
      auto f = open_out(out / "ablation.csv");
      ablation::write_rows_csv(f, rows);
    }
    const auto summary = ablation::summarize(rows);
    {
      auto f = open_out(out / "ablation_summary.csv");
      ablation::write_summary_csv(f, summary);
    }
    for (const auto& s : summary) {
      std::printf("%-22s %-36s overall %.4f +- %.4f  mca %.4f +- %.4f\n", s.config_id.c_str(),
                  s.description.c_str(), s.mean_overall, s.std_overall, s.mean_mca, s.std_mca);
    }
    return kExitOk;
  });
}

int cmd_verify() {
  return guarded([] { return verify::report(std::cout, verify::run()) == 0 ? kExitOk : kExitFailure; });
}

int run(int argc, char** argv) {
  CLI::App app{"Multi-level consistency learning for semi-supervised domain adaptation"};
  app.require_subcommand(1);
  Invocation inv;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", inv.config_path, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--override", inv.overrides, "KEY=VALUE, applied after the file")
        ->allow_extra_args(false);
    sub->add_option("--seeds", inv.seeds, "comma-separated seed list");
  };

  auto* gen = app.add_subcommand("generate", "write <out>_source.csv and <out>_target.csv");
  add_common(gen);
  gen->add_option("--out", inv.out, "output prefix")->required();

  auto* tr = app.add_subcommand("train", "train one model per seed");
  add_common(tr);
  tr->add_option("--out", inv.out, "output directory")->required();

  auto* ab = app.add_subcommand("ablate", "run the ablation grid");
  add_common(ab);
  ab->add_option("--out", inv.out, "output directory")->required();
  ab->add_option("--jobs", inv.jobs, "parallel grid cells")->check(CLI::PositiveNumber);
  ab->add_option("--grid", inv.grid, "tab4 | tab5 | all")
      ->check(CLI::IsMember({"tab4", "tab5", "all"}));

  auto* ver = app.add_subcommand("verify", "run the property suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (gen->parsed()) return cmd_generate(inv);
  if (tr->parsed()) return cmd_train(inv);
  if (ab->parsed()) return cmd_ablate(inv);
  if (ver->parsed()) return cmd_verify();
  return kExitConfig;
}

}  // namespace mcl::cli
