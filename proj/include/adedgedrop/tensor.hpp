#ifndef ADEDGEDROP_TENSOR_HPP
#define ADEDGEDROP_TENSOR_HPP

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "adedgedrop/matrix.hpp"
#include "adedgedrop/sparse.hpp"

namespace adedgedrop {

/// Trainable tensor. `grad` accumulates across backward passes until zeroed;
/// the moment buffers are only touched by the adaptive optimizer.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool has_grad = false;

  Matrix adam_m;
  Matrix adam_v;
  long adam_step = 0;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix::zeros_like(value)) {}

  void zero_grad();
};

/// Handle to a node recorded on a Tape.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

/// Define-by-run reverse-mode tape. Nodes are appended in execution order and
/// backward visits them once each, in exact reverse order. Every op checks its
/// output for NaN/Inf and throws NumericError.
///
/// A Tape keeps raw pointers to the sparse operands of spmm and to bound
/// Parameters; both must outlive the tape. Not thread-safe; one tape per run.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf without gradient.
  Var constant(Matrix value);
  /// Leaf with gradient, read back through grad().
  Var variable(Matrix value);
  /// Leaf bound to a Parameter; backward adds into p.grad.
  Var parameter(Parameter& p);

  Var matmul(Var a, Var b);
  Var spmm(const SparseMatrix& s, Var dense);
  /// a + b for equal shapes, or a + broadcast row vector when b is 1 x cols.
  Var add(Var a, Var b);
  Var hadamard(Var a, Var b);
  Var relu(Var a);
  Var sigmoid(Var a);
  Var row_softmax(Var a);
  /// Scalar sum of all entries.
  Var sum(Var a);
  /// Scalar -scale * sum_k ln(max(p[rows[k], cols[k]], 1e-12)).
  Var nll(Var probs, std::span<const std::size_t> rows, std::span<const std::size_t> cols,
          double scale);

  const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
  /// Gradient of a requires-grad node; zero-shaped matrix for constants.
  const Matrix& grad(Var v) const { return nodes_.at(v.id).grad; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Reverse sweep from a 1 x 1 loss. Intermediate gradients are recomputed
  /// on every call; leaf and Parameter gradients accumulate.
  void backward(Var loss);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool is_leaf = false;
    Parameter* sink = nullptr;
    std::function<void(Tape&, std::size_t)> backward;
  };

  Var push(Matrix value, bool requires_grad, std::function<void(Tape&, std::size_t)> bw,
           const char* op);
  Matrix& grad_buffer(std::size_t id);
  bool needs(Var v) const { return nodes_[v.id].requires_grad; }

  std::vector<Node> nodes_;
};

/// Row-wise softmax without autodiff, max-shifted.
Matrix row_softmax(const Matrix& m);

/// p <- p - lr * p.grad, then zeroes grads. Throws ContractError when a
/// parameter has no gradient.
void sgd_step(std::span<Parameter* const> params, double lr);

struct AdamOptions {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam step using per-parameter moment buffers, then zeroes grads.
void adam_step(std::span<Parameter* const> params, const AdamOptions& opt);

/// Multiplies every gradient by `factor` (used to average accumulated gradients).
void scale_grads(std::span<Parameter* const> params, double factor);

}  // namespace adedgedrop

#endif  // ADEDGEDROP_TENSOR_HPP
