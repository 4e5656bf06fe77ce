#include "mcl/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mcl/errors.hpp"

namespace mcl::ot {

namespace {

constexpr double kScalingStart = 1.0;
constexpr double kScalingFactor = 0.5;
constexpr double kStageTolerance = 1e-4;

void require_unit_rows(const Tensor& x, const char* what) {
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double norm = row_norm(x.row(i));
    if (std::fabs(norm - 1.0) > kUnitNormTolerance) {
      throw ContractError(std::string("cost_matrix: ") + what + " row " + std::to_string(i) +
                          " is not unit-norm (norm " + std::to_string(norm) + ")");
    }
  }
}

void require_marginal(std::span<const double> mu, std::size_t n, const char* what) {
  if (mu.size() != n) {
    throw ParameterError(std::string("sinkhorn: ") + what + " has " + std::to_string(mu.size()) +
                         " entries, cost needs " + std::to_string(n));
  }
  double total = 0.0;
  for (double v : mu) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ParameterError(std::string("sinkhorn: ") + what + " must be strictly positive");
    }
    total += v;
  }
  if (std::fabs(total - 1.0) > 1e-9) {
    throw ParameterError(std::string("sinkhorn: ") + what + " must sum to 1");
  }
}

// Potentials f (rows) and g (columns) parametrize
// gamma_ij = mu_i nu_j exp((f_i + g_j - C_ij) / eps).
struct LogDomainState {
  const Tensor& cost;
  std::vector<double> log_mu, log_nu, f, g;
  double eps;

  LogDomainState(const Tensor& c, std::span<const double> mu, std::span<const double> nu, double e)
      : cost(c), log_mu(mu.size()), log_nu(nu.size()), f(mu.size(), 0.0), g(nu.size(), 0.0),
        eps(e) {
    std::transform(mu.begin(), mu.end(), log_mu.begin(), [](double v) { return std::log(v); });
    std::transform(nu.begin(), nu.end(), log_nu.begin(), [](double v) { return std::log(v); });
  }

  // Returns the largest absolute change of a potential entry.
  double update_rows(double damping) {
    const std::size_t n = f.size(), m = g.size();
    std::vector<double> terms(m);
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < m; ++j) {
        terms[j] = log_nu[j] + (g[j] - cost(i, j)) / eps;
        mx = std::max(mx, terms[j]);
      }
      double s = 0.0;
      for (double t : terms) s += std::exp(t - mx);
      const double updated = -damping * eps * (mx + std::log(s));
      change = std::max(change, std::fabs(updated - f[i]));
      f[i] = updated;
    }
    return change;
  }

  double update_cols(double damping) {
    const std::size_t n = f.size(), m = g.size();
    std::vector<double> terms(n);
    double change = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) {
        terms[i] = log_mu[i] + (f[i] - cost(i, j)) / eps;
        mx = std::max(mx, terms[i]);
      }
      double s = 0.0;
      for (double t : terms) s += std::exp(t - mx);
      const double updated = -damping * eps * (mx + std::log(s));
      change = std::max(change, std::fabs(updated - g[j]));
      g[j] = updated;
    }
    return change;
  }

  Tensor plan() const {
    Tensor gamma = Tensor::zeros(f.size(), g.size());
    for (std::size_t i = 0; i < f.size(); ++i)
      for (std::size_t j = 0; j < g.size(); ++j)
        gamma(i, j) = std::exp(log_mu[i] + log_nu[j] + (f[i] + g[j] - cost(i, j)) / eps);
    return gamma;
  }
};

double marginal_violation(const Tensor& gamma, std::span<const double> mu,
                          std::span<const double> nu) {
  double row_err = 0.0, col_err = 0.0;
  std::vector<double> cols(gamma.cols(), 0.0);
  for (std::size_t i = 0; i < gamma.rows(); ++i) {
    double r = 0.0;
    for (std::size_t j = 0; j < gamma.cols(); ++j) {
      r += gamma(i, j);
      cols[j] += gamma(i, j);
    }
    row_err += std::fabs(r - mu[i]);
  }
  for (std::size_t j = 0; j < cols.size(); ++j) col_err += std::fabs(cols[j] - nu[j]);
  return std::max(row_err, col_err);
}

}  // namespace

CostMatrix cost_matrix(const Tensor& reference, const Tensor& targets, View view, Reference ref) {
  if (reference.cols() != targets.cols()) {
    throw DimensionError("cost_matrix: feature dimensions differ");
  }
  require_unit_rows(reference, "reference");
  require_unit_rows(targets, "target");
  Tensor c = matmul_transposed(reference, targets);
  for (double& v : c.data()) v = 1.0 - v;
  return CostMatrix{std::move(c), view, ref};
}

ad::Var cost_matrix(const Tensor& reference, const ad::Var& targets) {
  if (reference.cols() != targets.cols()) {
    throw DimensionError("cost_matrix: feature dimensions differ");
  }
  require_unit_rows(reference, "reference");
  require_unit_rows(targets.value(), "target");
  const ad::Var similarity = ad::matmul(ad::constant(reference), ad::transpose(targets));
  return ad::add_scalar(ad::scalar_mul(similarity, -1.0), 1.0);
}

void SinkhornConfig::validate() const {
  if (!(epsilon > 0.0)) throw ParameterError("sinkhorn: epsilon must be positive");
  if (!(rho > 0.0)) throw ParameterError("sinkhorn: rho must be positive");
  if (max_iters < 1) throw ParameterError("sinkhorn: max_iters must be at least 1");
  if (!(tolerance > 0.0)) throw ParameterError("sinkhorn: tolerance must be positive");
}

double CouplingPlan::total_mass() const {
  return std::accumulate(gamma.data().begin(), gamma.data().end(), 0.0);
}

CouplingPlan sinkhorn_balanced(const Tensor& cost, std::span<const double> mu_s,
                               std::span<const double> mu_t, const SinkhornConfig& cfg) {
  cfg.validate();
  require_marginal(mu_s, cost.rows(), "mu_s");
  require_marginal(mu_t, cost.cols(), "mu_t");

  // Epsilon scaling: coarse stages warm-start the potentials, the last stage
  // runs at cfg.epsilon to the requested tolerance.
  std::vector<double> schedule;
  for (double e = kScalingStart; e > cfg.epsilon; e *= kScalingFactor) schedule.push_back(e);
  schedule.push_back(cfg.epsilon);

  LogDomainState state(cost, mu_s, mu_t, schedule.front());
  CouplingPlan result;
  for (std::size_t stage = 0; stage < schedule.size(); ++stage) {
    const bool last = stage + 1 == schedule.size();
    state.eps = schedule[stage];
    const double tol = last ? cfg.tolerance : std::max(cfg.tolerance, kStageTolerance);
    for (int it = 1; it <= cfg.max_iters; ++it) {
      state.update_rows(1.0);
      state.update_cols(1.0);
      ++result.iterations;
      result.gamma = state.plan();
      result.marginal_violation = marginal_violation(result.gamma, mu_s, mu_t);
      if (result.marginal_violation <= tol) {
        result.converged = last;
        break;
      }
    }
  }
  return result;
}

CouplingPlan sinkhorn_unbalanced(const Tensor& cost, std::span<const double> mu_s,
                                 std::span<const double> mu_t, const SinkhornConfig& cfg) {
  cfg.validate();
  require_marginal(mu_s, cost.rows(), "mu_s");
  require_marginal(mu_t, cost.cols(), "mu_t");

  const double damping = cfg.rho / (cfg.rho + cfg.epsilon);
  LogDomainState state(cost, mu_s, mu_t, cfg.epsilon);
  CouplingPlan result;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    const double df = state.update_rows(damping);
    const double dg = state.update_cols(damping);
    result.iterations = it;
    if (std::max(df, dg) <= cfg.tolerance) {
      result.converged = true;
      break;
    }
  }
  result.gamma = state.plan();
  result.marginal_violation = marginal_violation(result.gamma, mu_s, mu_t);
  return result;
}

CouplingPlan solve(const Tensor& cost, std::span<const double> mu_s, std::span<const double> mu_t,
                   const SinkhornConfig& cfg) {
  return cfg.mode == SinkhornMode::balanced ? sinkhorn_balanced(cost, mu_s, mu_t, cfg)
                                            : sinkhorn_unbalanced(cost, mu_s, mu_t, cfg);
}

std::vector<double> uniform_marginal(std::size_t n) {
  return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

ad::Var inter_loss(const Tensor& gamma, const ad::Var& cost_b) {
  if (!gamma.same_shape(cost_b.value())) {
    throw DimensionError("inter_loss: coupling " + shape_string(gamma.shape()) +
                         " does not match cost " + shape_string(cost_b.value().shape()));
  }
  return ad::frobenius_inner(gamma, cost_b);
}

double transport_cost(const Tensor& gamma, const Tensor& cost) { return frobenius(gamma, cost); }

double exact_ot_bruteforce(const Tensor& cost) {
  if (cost.rank() != 2 || cost.rows() != cost.cols()) {
    throw DimensionError("exact_ot_bruteforce: cost must be square");
  }
  const std::size_t n = cost.rows();
  if (n > kBruteForceMaxN) {
    throw ParameterError("exact_ot_bruteforce: n = " + std::to_string(n) + " exceeds " +
                         std::to_string(kBruteForceMaxN));
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += cost(i, perm[i]);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(n);
}

std::string to_string(SinkhornMode mode) {
  return mode == SinkhornMode::balanced ? "balanced" : "unbalanced";
}

std::string to_string(Reference ref) {
  return ref == Reference::prototypes ? "prototypes" : "source_batch";
}

}  // namespace mcl::ot
