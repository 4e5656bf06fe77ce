#pragma once

#include <span>
#include <string>
#include <vector>

#include "mcl/autodiff.hpp"
#include "mcl/tensor.hpp"

namespace mcl::ot {

enum class View { A, B };
enum class Reference { prototypes, source_batch };

// Cosine cost between unit-norm reference rows and unit-norm target rows:
// C[i, j] = 1 - <reference_i, target_j>, so every entry lies in [0, 2].
struct CostMatrix {
  Tensor values;  // n_ref × n_target
  View view = View::A;
  Reference reference = Reference::prototypes;
};

inline constexpr double kUnitNormTolerance = 1e-6;

CostMatrix cost_matrix(const Tensor& reference, const Tensor& targets, View view = View::A,
                       Reference ref = Reference::prototypes);

// Differentiable counterpart for Step 2: reference rows are constants, gradient
// flows into `targets` only.
ad::Var cost_matrix(const Tensor& reference, const ad::Var& targets);

enum class SinkhornMode { balanced, unbalanced };

struct SinkhornConfig {
  double epsilon = 0.05;
  int max_iters = 1000;
  double tolerance = 1e-9;
  SinkhornMode mode = SinkhornMode::unbalanced;
  double rho = 1.0;

  void validate() const;
};

struct CouplingPlan {
  Tensor gamma;  // n_ref × n_target, non-negative
  int iterations = 0;
  // Max of the L1 row-marginal and L1 column-marginal errors.
  double marginal_violation = 0.0;
  bool converged = false;

  double total_mass() const;
};

// Entropic OT with KL regularization against mu_s ⊗ mu_t, solved with
// log-domain Sinkhorn iterations. Stops once the marginal violation is at most
// cfg.tolerance; otherwise returns the last iterate with converged = false.
CouplingPlan sinkhorn_balanced(const Tensor& cost, std::span<const double> mu_s,
                               std::span<const double> mu_t, const SinkhornConfig& cfg);

// KL-relaxed marginals with strength rho: both potential updates are damped by
// rho / (rho + epsilon). Stops when the potentials move less than
// cfg.tolerance. Total mass never exceeds 1 for non-negative costs.
CouplingPlan sinkhorn_unbalanced(const Tensor& cost, std::span<const double> mu_s,
                                 std::span<const double> mu_t, const SinkhornConfig& cfg);

CouplingPlan solve(const Tensor& cost, std::span<const double> mu_s, std::span<const double> mu_t,
                   const SinkhornConfig& cfg);

std::vector<double> uniform_marginal(std::size_t n);

// ⟨gamma, cost_b⟩_F with gamma held constant.
ad::Var inter_loss(const Tensor& gamma, const ad::Var& cost_b);

double transport_cost(const Tensor& gamma, const Tensor& cost);

// Exact uniform-marginal OT on a square cost by enumerating permutations.
// Refuses n > 7.
double exact_ot_bruteforce(const Tensor& cost);

inline constexpr std::size_t kBruteForceMaxN = 7;

std::string to_string(SinkhornMode mode);
std::string to_string(Reference ref);

}  // namespace mcl::ot
