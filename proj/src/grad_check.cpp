#include "mcl/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace mcl::ad {

double gradient_relative_error(double analytic, double numeric) {
  const double scale = std::max({std::fabs(analytic), std::fabs(numeric), 1.0});
  return std::fabs(analytic - numeric) / scale;
}

GradCheckReport grad_check(const std::function<Var(const Var&)>& f, const Tensor& x, double step,
                           double tol) {
  Var leaf = parameter(x);
  return grad_check_params([&] { return f(leaf); }, {leaf}, step, tol);
}

GradCheckReport grad_check_params(const std::function<Var()>& loss, std::vector<Var> params,
                                  double step, double tol) {
  for (Var& p : params) p.zero_grad();
  backward(loss());

  GradCheckReport report;
  std::size_t flat = 0;
  for (Var& p : params) {
    const Tensor analytic = p.grad();
    Tensor& value = p.mutable_value();
    for (std::size_t i = 0; i < value.size(); ++i, ++flat) {
      const double original = value[i];
      value[i] = original + step;
      const double plus = loss().value().item();
      value[i] = original - step;
      const double minus = loss().value().item();
      value[i] = original;
      report.evaluations += 2;
      const double numeric = (plus - minus) / (2.0 * step);
      const double err = gradient_relative_error(analytic[i], numeric);
      if (!(err <= report.max_relative_error)) {
        report.max_relative_error = err;
        report.worst_index = flat;
      }
    }
  }
  report.passed = report.max_relative_error <= tol;
  return report;
}

}  // namespace mcl::ad
