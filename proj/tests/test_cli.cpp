#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mcl/checkpoint.hpp"
#include "mcl/cli.hpp"
#include "mcl/verify.hpp"

namespace fs = std::filesystem;
using namespace mcl;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("mcl_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const std::string& text) {
    const fs::path p = dir_ / "run.cfg";
    std::ofstream(p) << text;
    return p;
  }

  int run(std::vector<std::string> args) {
    args.insert(args.begin(), "mcl");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return cli::run(static_cast<int>(argv.size()), argv.data());
  }

  fs::path dir_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string last_line(const std::string& text) {
  const auto end = text.find_last_not_of('\n');
  const auto start = text.rfind('\n', end);
  return text.substr(start + 1, end - start);
}

std::string field(const std::string& csv_line, std::size_t index) {
  std::stringstream s(csv_line);
  std::string item;
  for (std::size_t i = 0; i <= index; ++i) std::getline(s, item, ',');
  return item;
}

const char* kSmall = "dataset = two_moons\nseed = 3\nn_per_domain = 60\niterations = 20\neval_interval = 10\n";

}  // namespace

TEST_F(CliTest, GenerateWritesBothDomains) {
  const auto cfg = write_config(kSmall);
  ASSERT_EQ(run({"generate", "--config", cfg.string(), "--out", (dir_ / "a").string()}), 0);
  ASSERT_EQ(run({"generate", "--config", cfg.string(), "--out", (dir_ / "b").string()}), 0);
  const std::string target = slurp(dir_ / "a_target.csv");
  EXPECT_EQ(std::count(target.begin(), target.end(), '\n'), 61);
  EXPECT_EQ(target, slurp(dir_ / "b_target.csv"));
  EXPECT_EQ(slurp(dir_ / "a_source.csv"), slurp(dir_ / "b_source.csv"));
}

TEST_F(CliTest, MissingDatasetIsConfigError) {
  const auto cfg = write_config("seed = 1\n");
  testing::internal::CaptureStderr();
  const int code = run({"generate", "--config", cfg.string(), "--out", (dir_ / "x").string()});
  const std::string err = testing::internal::GetCapturedStderr();
  EXPECT_EQ(code, cli::kExitConfig);
  EXPECT_NE(err.find("dataset"), std::string::npos);
}

TEST_F(CliTest, UnknownFlagIsConfigError) {
  testing::internal::CaptureStderr();
  EXPECT_EQ(run({"train", "--bogus"}), cli::kExitConfig);
  testing::internal::GetCapturedStderr();
}

TEST_F(CliTest, TrainWritesArtifacts) {
  const auto cfg = write_config(kSmall);
  const fs::path out = dir_ / "run";
  ASSERT_EQ(run({"train", "--config", cfg.string(), "--out", out.string()}), 0);
  ASSERT_TRUE(fs::exists(out / "metrics.csv"));
  ASSERT_TRUE(fs::exists(out / "final.ckpt"));
  ASSERT_TRUE(fs::exists(out / "summary.txt"));

  const std::string metrics = slurp(out / "metrics.csv");
  const std::string summary = slurp(out / "summary.txt");
  const std::string acc = field(last_line(metrics), 8);
  EXPECT_NE(summary.find("acc_overall = " + acc + "\n"), std::string::npos) << summary;

  const auto tensors = load_checkpoint_file((out / "final.ckpt").string());
  EXPECT_EQ(tensors.back().first, "prototypes");
}

TEST_F(CliTest, TrainIsByteDeterministic) {
  const auto cfg = write_config(kSmall);
  ASSERT_EQ(run({"train", "--config", cfg.string(), "--out", (dir_ / "a").string()}), 0);
  ASSERT_EQ(run({"train", "--config", cfg.string(), "--out", (dir_ / "b").string()}), 0);
  EXPECT_EQ(slurp(dir_ / "a" / "metrics.csv"), slurp(dir_ / "b" / "metrics.csv"));
  EXPECT_EQ(slurp(dir_ / "a" / "final.ckpt"), slurp(dir_ / "b" / "final.ckpt"));
}

TEST_F(CliTest, OverrideIsEchoed) {
  const auto cfg = write_config(kSmall);
  ASSERT_EQ(run({"train", "--config", cfg.string(), "--override", "lambda2=0", "--override",
                 "iterations=5", "--out", (dir_ / "o").string()}),
            0);
  const std::string summary = slurp(dir_ / "o" / "summary.txt");
  EXPECT_NE(summary.find("lambda2 = 0\n"), std::string::npos);
  EXPECT_NE(summary.find("iterations = 5\n"), std::string::npos);
}

TEST_F(CliTest, MultipleSeedsAggregate) {
  const auto cfg = write_config(kSmall);
  const fs::path out = dir_ / "multi";
  ASSERT_EQ(run({"train", "--config", cfg.string(), "--seeds", "1,2,3", "--out", out.string()}), 0);
  for (const char* s : {"seed_1", "seed_2", "seed_3"}) {
    EXPECT_TRUE(fs::exists(out / s / "metrics.csv")) << s;
  }
  const std::string summary = slurp(out / "summary.txt");
  EXPECT_NE(summary.find("acc_overall = "), std::string::npos);
  EXPECT_NE(summary.find(" +- "), std::string::npos);
}

TEST_F(CliTest, DivergenceExitsWithRuntimeCode) {
  // Unit-norm features keep the loss finite, so poison the data instead.
  std::ofstream(dir_ / "src.csv") << "x0,x1,label,domain,role\nnan,0,0,source,labeled\n1,1,1,source,labeled\n";
  std::ofstream(dir_ / "tgt.csv") << "x0,x1,label,domain,role\n0,0,0,target,labeled\n1,1,1,target,labeled\n"
                                     "0.1,0,0,target,unlabeled\n1,0.9,1,target,unlabeled\n";
  const auto cfg = write_config("dataset = csv\nsource_csv = " + (dir_ / "src.csv").string() +
                                "\ntarget_csv = " + (dir_ / "tgt.csv").string() +
                                "\niterations = 5\nbatch_source = 2\nbatch_labeled = 2\nbatch_unlabeled = 2\n");
  testing::internal::CaptureStderr();
  const int code = run({"train", "--config", cfg.string(), "--out", (dir_ / "d").string()});
  testing::internal::GetCapturedStderr();
  EXPECT_EQ(code, cli::kExitRuntime);
}

TEST_F(CliTest, AblateTab4) {
  const auto cfg = write_config(kSmall);
  const fs::path out = dir_ / "abl";
  testing::internal::CaptureStdout();
  ASSERT_EQ(run({"ablate", "--config", cfg.string(), "--seeds", "1,2", "--grid", "tab4", "--jobs",
                 "2", "--out", out.string()}),
            0);
  testing::internal::GetCapturedStdout();
  const std::string csv = slurp(out / "ablation.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 4 * 2);
  EXPECT_TRUE(fs::exists(out / "cells" / "tab4_proto_class.csv"));
}

TEST_F(CliTest, AblateRejectsUnknownGrid) {
  const auto cfg = write_config(kSmall);
  testing::internal::CaptureStderr();
  EXPECT_EQ(run({"ablate", "--config", cfg.string(), "--grid", "tab9", "--out", dir_.string()}),
            cli::kExitConfig);
  testing::internal::GetCapturedStderr();
}

TEST(Verify, ReportListsGroupsAndPasses) {
  verify::Options opts;
  opts.gradient_instances = 1;
  opts.sinkhorn_instances = 8;
  const auto results = verify::run(opts);
  std::ostringstream out;
  EXPECT_EQ(verify::report(out, results), 0) << out.str();
  std::set<std::string> groups;
  for (const auto& r : results) groups.insert(r.group);
  EXPECT_GE(groups.size(), 4u);
  EXPECT_NE(out.str().find("gradients: "), std::string::npos);
}

TEST(Verify, InjectedGradientBugFails) {
  verify::Options opts;
  opts.gradient_instances = 1;
  opts.sinkhorn_instances = 4;
  opts.extra_gradient_cases.push_back({"broken_tanh", [] {
    const Tensor x = Tensor::from_rows({{0.3, -0.7}, {1.1, 0.2}});
    return ad::grad_check(
        [](const ad::Var& v) {
          Tensor y = v.value();
          for (double& e : y.data()) e = std::tanh(e);
          // Derivative taken as 1 - tanh instead of 1 - tanh².
          const ad::Var bad = ad::make_op(
              "broken_tanh", y, {v}, [y](const Tensor& up, std::span<Tensor* const> grads) {
                if (!grads[0]) return;
                for (std::size_t i = 0; i < up.size(); ++i) (*grads[0])[i] += up[i] * (1.0 - y[i]);
              });
          return ad::sum(bad);
        },
        x);
  }});
  const auto results = verify::run(opts);
  std::ostringstream out;
  EXPECT_EQ(verify::report(out, results), 1);
  EXPECT_NE(out.str().find("[FAIL] gradients/broken_tanh"), std::string::npos) << out.str();
}
