#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mcl/tensor.hpp"

namespace mcl::ad {

// Backward rule of a recorded operation. `upstream` is d(root)/d(output);
// `parent_grads[k]` is the gradient buffer of the k-th operand, or nullptr when
// that operand does not require a gradient. Rules must accumulate (+=).
using BackwardFn =
    std::function<void(const Tensor& upstream, std::span<Tensor* const> parent_grads)>;

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::string op;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;
};

// Handle to a node of the computation tape. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  const Tensor& value() const { return node_->value; }
  // Mutable access for optimizers and finite-difference probes. Does not
  // invalidate recorded graphs, so only touch leaves.
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  const std::string& op() const { return node_->op; }
  const std::shared_ptr<Node>& node() const { return node_; }
  bool valid() const { return node_ != nullptr; }

  void zero_grad();

  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  friend Var make_op(std::string, Tensor, const std::vector<Var>&, BackwardFn);
  std::shared_ptr<Node> node_;
};

inline Var parameter(Tensor value) { return Var(std::move(value), true); }
inline Var constant(Tensor value) { return Var(std::move(value), false); }

// Records a new node. The backward rule is dropped when no operand requires a
// gradient, so constant subgraphs do not grow the tape.
Var make_op(std::string name, Tensor value, const std::vector<Var>& parents, BackwardFn backward);

// Reverse-mode sweep from a scalar root. Gradients accumulate into every
// reachable node with requires_grad set.
void backward(const Var& root);

inline constexpr double kLogFloor = 1e-12;
inline constexpr double kNormFloor = 1e-12;

Var add(const Var& a, const Var& b);
Var subtract(const Var& a, const Var& b);
Var scalar_mul(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var elementwise_mul(const Var& a, const Var& b);
Var add_row_vector(const Var& x, const Var& bias);  // x: n×d, bias: 1×d
Var log(const Var& x);                               // log(max(x, 1e-12))
Var abs(const Var& x);                               // sign(0) = 0 in backward
Var relu(const Var& x);
Var tanh(const Var& x);
Var transpose(const Var& x);
Var sum(const Var& x);
Var mean(const Var& x);
Var row_sum(const Var& x);  // n×1
Var select_columns(const Var& x, std::span<const std::size_t> columns);
Var frobenius_inner(const Tensor& weights, const Var& x);  // scalar Σ wᵢⱼ xᵢⱼ
Var matmul(const Var& a, const Var& b);
Var softmax_rows(const Var& x, double temperature);
Var l2_normalize_rows(const Var& x, double norm_floor = kNormFloor);
// Divides each row by (row sum + floor).
Var normalize_row_sums(const Var& x, double floor);
Var concat_rows(const Var& top, const Var& bottom);
Var detach(const Var& x);

}  // namespace mcl::ad
