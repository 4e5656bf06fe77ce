#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "mcl/grad_check.hpp"
#include "mcl/losses.hpp"
#include "mcl/model.hpp"
#include "mcl/ot.hpp"

namespace mcl::verify {

// A small random MCL problem: a model, a labeled batch, two unlabeled views,
// prototypes and a fixed coupling. Every loss of the objective can be rebuilt
// from the current parameter values, which is what finite differences need.
struct LossFixture {
  model::Model model;
  Tensor source_x;
  std::vector<std::size_t> source_y;
  Tensor view_a;
  Tensor view_b;
  Tensor prototypes;  // C × d unit rows
  Tensor gamma;       // C × n coupling, held fixed
  losses::PseudoLabelConfig pl{0.6, 1.25};
  double lambda1 = 1.0;
  double lambda2 = 0.2;

  // Defaults match the gradient acceptance setting: n = 8, C = 3, d = 5.
  static LossFixture random(std::uint64_t seed, std::size_t n = 8, std::size_t num_classes = 3,
                            std::size_t feature_dim = 5, std::size_t input_dim = 4);

  ad::Var probs(const Tensor& x, double temperature = 1.0) const;
  ad::Var cross_entropy() const;
  ad::Var inter() const;
  ad::Var intra(losses::IntraVariant variant) const;
  ad::Var pseudo_label() const;
  ad::Var total() const;
};

struct CheckResult {
  std::string group;
  std::string name;
  bool passed = false;
  std::string detail;
};

struct GradientCase {
  std::string name;
  std::function<ad::GradCheckReport()> run;
};

struct Options {
  std::size_t gradient_instances = 5;
  std::size_t sinkhorn_instances = 20;
  // Appended to the built-in gradient group; the test suite injects a faulty
  // backward rule here as a negative control.
  std::vector<GradientCase> extra_gradient_cases;
};

std::vector<GradientCase> builtin_gradient_cases(std::size_t instances);

// Balanced Sinkhorn at eps = 0.001 against permutation enumeration.
std::vector<CheckResult> sinkhorn_oracle_checks(std::size_t instances);
std::vector<CheckResult> unbalanced_limit_checks(std::size_t instances);
std::vector<CheckResult> closed_form_checks();
std::vector<CheckResult> separation_checks();
std::vector<CheckResult> determinism_checks();

std::vector<CheckResult> run(const Options& options = {});

// Prints one line per check plus per-group counts. Returns the process exit
// code: 0 iff every check passed.
int report(std::ostream& out, const std::vector<CheckResult>& results);

}  // namespace mcl::verify
