#include "mcl/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "mcl/errors.hpp"

namespace mcl::ad {

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a.value().same_shape(b.value())) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.value().shape()) +
                         " vs " + shape_string(b.value().shape()));
  }
}

void require_matrix(const Var& a, const char* op) {
  if (a.value().rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " +
                         shape_string(a.value().shape()));
  }
}

void accumulate(Tensor* target, const Tensor& delta) {
  if (target == nullptr) return;
  for (std::size_t i = 0; i < delta.size(); ++i) (*target)[i] += delta[i];
}

template <typename Fn>
Var unary_elementwise(const char* name, const Var& x, Fn value_fn,
                      std::function<double(double x, double y)> derivative) {
  Tensor out = x.value();
  for (double& v : out.data()) v = value_fn(v);
  Tensor input = x.value();
  Tensor output = out;
  return make_op(name, std::move(out), {x},
                 [input = std::move(input), output = std::move(output), derivative](
                     const Tensor& g, std::span<Tensor* const> grads) {
                   Tensor& gx = *grads[0];
                   for (std::size_t i = 0; i < g.size(); ++i)
                     gx[i] += g[i] * derivative(input[i], output[i]);
                 });
}

}  // namespace

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->grad = Tensor(value.shape());
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
  node_->op = "leaf";
}

void Var::zero_grad() { node_->grad.fill(0.0); }

Var make_op(std::string name, Tensor value, const std::vector<Var>& parents, BackwardFn backward) {
  Var out;
  out.node_ = std::make_shared<Node>();
  out.node_->op = std::move(name);
  const bool any = std::any_of(parents.begin(), parents.end(),
                               [](const Var& p) { return p.requires_grad(); });
  out.node_->requires_grad = any;
  out.node_->grad = Tensor(value.shape());
  out.node_->value = std::move(value);
  if (any) {
    out.node_->parents.reserve(parents.size());
    for (const Var& p : parents) out.node_->parents.push_back(p.node());
    out.node_->backward = std::move(backward);
  }
  return out;
}

void backward(const Var& root) {
  if (!root.valid() || !root.value().is_scalar()) {
    throw ContractError("backward: root must be a scalar");
  }
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->grad[0] += 1.0;
  std::vector<Tensor*> parent_grads;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (!node->backward) continue;
    parent_grads.clear();
    for (const auto& p : node->parents) parent_grads.push_back(p->requires_grad ? &p->grad : nullptr);
    node->backward(node->grad, parent_grads);
  }
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return make_op("add", std::move(out), {a, b}, [](const Tensor& g, std::span<Tensor* const> gr) {
    accumulate(gr[0], g);
    accumulate(gr[1], g);
  });
}

Var subtract(const Var& a, const Var& b) {
  require_same_shape(a, b, "subtract");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return make_op("subtract", std::move(out), {a, b},
                 [](const Tensor& g, std::span<Tensor* const> gr) {
                   accumulate(gr[0], g);
                   if (gr[1]) {
                     for (std::size_t i = 0; i < g.size(); ++i) (*gr[1])[i] -= g[i];
                   }
                 });
}

Var scalar_mul(const Var& a, double s) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= s;
  return make_op("scalar_mul", std::move(out), {a},
                 [s](const Tensor& g, std::span<Tensor* const> gr) {
                   for (std::size_t i = 0; i < g.size(); ++i) (*gr[0])[i] += s * g[i];
                 });
}

Var add_scalar(const Var& a, double s) {
  Tensor out = a.value();
  for (double& v : out.data()) v += s;
  return make_op("add_scalar", std::move(out), {a},
                 [](const Tensor& g, std::span<Tensor* const> gr) { accumulate(gr[0], g); });
}

Var elementwise_mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "elementwise_mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_op("elementwise_mul", std::move(out), {a, b},
                 [av = a.value(), bv = b.value()](const Tensor& g, std::span<Tensor* const> gr) {
                   for (std::size_t i = 0; i < g.size(); ++i) {
                     if (gr[0]) (*gr[0])[i] += g[i] * bv[i];
                     if (gr[1]) (*gr[1])[i] += g[i] * av[i];
                   }
                 });
}

Var add_row_vector(const Var& x, const Var& bias) {
  require_matrix(x, "add_row_vector");
  require_matrix(bias, "add_row_vector");
  if (bias.rows() != 1 || bias.cols() != x.cols()) {
    throw DimensionError("add_row_vector: bias " + shape_string(bias.value().shape()) +
                         " does not match " + shape_string(x.value().shape()));
  }
  Tensor out = x.value();
  const std::size_t n = x.rows(), d = x.cols();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out(i, j) += bias.value()[j];
  return make_op("add_row_vector", std::move(out), {x, bias},
                 [n, d](const Tensor& g, std::span<Tensor* const> gr) {
                   accumulate(gr[0], g);
                   if (gr[1]) {
                     for (std::size_t i = 0; i < n; ++i)
                       for (std::size_t j = 0; j < d; ++j) (*gr[1])[j] += g(i, j);
                   }
                 });
}

Var log(const Var& x) {
  return unary_elementwise(
      "log", x, [](double v) { return std::log(std::max(v, kLogFloor)); },
      [](double in, double) { return in > kLogFloor ? 1.0 / in : 0.0; });
}

Var abs(const Var& x) {
  return unary_elementwise(
      "abs", x, [](double v) { return std::fabs(v); },
      [](double in, double) { return in > 0.0 ? 1.0 : (in < 0.0 ? -1.0 : 0.0); });
}

Var relu(const Var& x) {
  return unary_elementwise(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

Var tanh(const Var& x) {
  return unary_elementwise(
      "tanh", x, [](double v) { return std::tanh(v); },
      [](double, double out) { return 1.0 - out * out; });
}

Var transpose(const Var& x) {
  require_matrix(x, "transpose");
  return make_op("transpose", x.value().transposed(), {x},
                 [](const Tensor& g, std::span<Tensor* const> gr) {
                   accumulate(gr[0], g.transposed());
                 });
}

Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return make_op("sum", Tensor::scalar(s), {x}, [](const Tensor& g, std::span<Tensor* const> gr) {
    for (double& v : gr[0]->data()) v += g[0];
  });
}

Var mean(const Var& x) {
  const double inv = 1.0 / static_cast<double>(x.value().size());
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return make_op("mean", Tensor::scalar(s * inv), {x},
                 [inv](const Tensor& g, std::span<Tensor* const> gr) {
                   for (double& v : gr[0]->data()) v += g[0] * inv;
                 });
}

Var row_sum(const Var& x) {
  require_matrix(x, "row_sum");
  const std::size_t n = x.rows(), d = x.cols();
  Tensor out({n, 1});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i] += x.value()(i, j);
  return make_op("row_sum", std::move(out), {x},
                 [n, d](const Tensor& g, std::span<Tensor* const> gr) {
                   for (std::size_t i = 0; i < n; ++i)
                     for (std::size_t j = 0; j < d; ++j) (*gr[0])(i, j) += g[i];
                 });
}

Var select_columns(const Var& x, std::span<const std::size_t> columns) {
  require_matrix(x, "select_columns");
  if (columns.empty()) throw DimensionError("select_columns: no columns selected");
  const std::size_t n = x.rows();
  for (std::size_t c : columns) {
    if (c >= x.cols()) throw DimensionError("select_columns: column out of range");
  }
  Tensor out({n, columns.size()});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < columns.size(); ++k) out(i, k) = x.value()(i, columns[k]);
  std::vector<std::size_t> cols(columns.begin(), columns.end());
  return make_op("select_columns", std::move(out), {x},
                 [n, cols = std::move(cols)](const Tensor& g, std::span<Tensor* const> gr) {
                   for (std::size_t i = 0; i < n; ++i)
                     for (std::size_t k = 0; k < cols.size(); ++k) (*gr[0])(i, cols[k]) += g(i, k);
                 });
}

Var frobenius_inner(const Tensor& weights, const Var& x) {
  if (!weights.same_shape(x.value())) {
    throw DimensionError("frobenius_inner: shape mismatch " + shape_string(weights.shape()) +
                         " vs " + shape_string(x.value().shape()));
  }
  return make_op("frobenius_inner", Tensor::scalar(mcl::frobenius(weights, x.value())), {x},
                 [weights](const Tensor& g, std::span<Tensor* const> gr) {
                   for (std::size_t i = 0; i < weights.size(); ++i) (*gr[0])[i] += g[0] * weights[i];
                 });
}

Var matmul(const Var& a, const Var& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  Tensor out = mcl::matmul(a.value(), b.value());
  return make_op("matmul", std::move(out), {a, b},
                 [av = a.value(), bv = b.value()](const Tensor& g, std::span<Tensor* const> gr) {
                   // dA = G Bᵀ, dB = Aᵀ G
                   if (gr[0]) accumulate(gr[0], mcl::matmul_transposed(g, bv));
                   if (gr[1]) accumulate(gr[1], mcl::matmul(av.transposed(), g));
                 });
}

Var softmax_rows(const Var& x, double temperature) {
  require_matrix(x, "softmax_rows");
  if (!(temperature > 0.0)) throw ParameterError("softmax_rows: temperature must be positive");
  const std::size_t n = x.rows(), c = x.cols();
  Tensor out = x.value();
  for (std::size_t i = 0; i < n; ++i) {
    auto row = out.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double& v : row) {
      v = std::exp((v - mx) / temperature);
      z += v;
    }
    for (double& v : row) v /= z;
  }
  Tensor y = out;
  return make_op("softmax_rows", std::move(out), {x},
                 [y = std::move(y), n, c, temperature](const Tensor& g,
                                                       std::span<Tensor* const> gr) {
                   for (std::size_t i = 0; i < n; ++i) {
                     double dot = 0.0;
                     for (std::size_t j = 0; j < c; ++j) dot += g(i, j) * y(i, j);
                     for (std::size_t j = 0; j < c; ++j)
                       (*gr[0])(i, j) += y(i, j) * (g(i, j) - dot) / temperature;
                   }
                 });
}

Var l2_normalize_rows(const Var& x, double norm_floor) {
  require_matrix(x, "l2_normalize_rows");
  const std::size_t n = x.rows(), d = x.cols();
  Tensor out = x.value();
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    norms[i] = row_norm(x.value().row(i));
    if (norms[i] < norm_floor) {
      throw DegenerateFeatureError("l2_normalize_rows: row " + std::to_string(i) +
                                   " has norm below the floor");
    }
    for (double& v : out.row(i)) v /= norms[i];
  }
  Tensor y = out;
  return make_op("l2_normalize_rows", std::move(out), {x},
                 [y = std::move(y), norms = std::move(norms), n, d](
                     const Tensor& g, std::span<Tensor* const> gr) {
                   for (std::size_t i = 0; i < n; ++i) {
                     double dot = 0.0;
                     for (std::size_t j = 0; j < d; ++j) dot += g(i, j) * y(i, j);
                     for (std::size_t j = 0; j < d; ++j)
                       (*gr[0])(i, j) += (g(i, j) - y(i, j) * dot) / norms[i];
                   }
                 });
}

Var normalize_row_sums(const Var& x, double floor) {
  require_matrix(x, "normalize_row_sums");
  const std::size_t n = x.rows(), d = x.cols();
  Tensor out = x.value();
  std::vector<double> denom(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (double v : x.value().row(i)) s += v;
    denom[i] = s + floor;
    for (double& v : out.row(i)) v /= denom[i];
  }
  Tensor y = out;
  return make_op("normalize_row_sums", std::move(out), {x},
                 [y = std::move(y), denom = std::move(denom), n, d](
                     const Tensor& g, std::span<Tensor* const> gr) {
                   for (std::size_t i = 0; i < n; ++i) {
                     double dot = 0.0;
                     for (std::size_t j = 0; j < d; ++j) dot += g(i, j) * y(i, j);
                     for (std::size_t j = 0; j < d; ++j)
                       (*gr[0])(i, j) += (g(i, j) - dot) / denom[i];
                   }
                 });
}

Var concat_rows(const Var& top, const Var& bottom) {
  require_matrix(top, "concat_rows");
  require_matrix(bottom, "concat_rows");
  if (top.cols() != bottom.cols()) throw DimensionError("concat_rows: column counts differ");
  const std::size_t n_top = top.value().size();
  std::vector<double> values(top.value().values());
  values.insert(values.end(), bottom.value().values().begin(), bottom.value().values().end());
  Tensor out({top.rows() + bottom.rows(), top.cols()}, std::move(values));
  return make_op("concat_rows", std::move(out), {top, bottom},
                 [n_top](const Tensor& g, std::span<Tensor* const> gr) {
                   if (gr[0]) {
                     for (std::size_t i = 0; i < n_top; ++i) (*gr[0])[i] += g[i];
                   }
                   if (gr[1]) {
                     for (std::size_t i = n_top; i < g.size(); ++i) (*gr[1])[i - n_top] += g[i];
                   }
                 });
}

Var detach(const Var& x) {
  Var out(x.value(), false);
  return out;
}

}  // namespace mcl::ad
