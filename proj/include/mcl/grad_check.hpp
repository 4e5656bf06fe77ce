#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mcl/autodiff.hpp"

namespace mcl::ad {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;  // flat index into the checked tensor(s)
  std::size_t evaluations = 0;
  bool passed = true;
};

// Relative error of one gradient entry: |analytic - numeric| scaled by
// max(|analytic|, |numeric|, 1). The unit floor keeps near-zero entries from
// turning finite-difference noise into spurious failures.
double gradient_relative_error(double analytic, double numeric);

// Compares the analytic gradient of a scalar function against central finite
// differences at `x`.
GradCheckReport grad_check(const std::function<Var(const Var&)>& f, const Tensor& x,
                           double step = 1e-5, double tol = 1e-4);

// Same check over a set of leaf parameters that `loss` closes over. Parameter
// values are perturbed in place and restored. Gradients of `params` are
// overwritten.
GradCheckReport grad_check_params(const std::function<Var()>& loss, std::vector<Var> params,
                                  double step = 1e-5, double tol = 1e-4);

}  // namespace mcl::ad
