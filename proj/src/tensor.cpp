#include "adedgedrop/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "adedgedrop/error.hpp"

namespace adedgedrop {
namespace {

constexpr double kProbFloor = 1e-12;

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_grad_present(const Parameter& p) {
  if (!p.has_grad || !p.grad.same_shape(p.value)) {
    throw ContractError("parameter '" + p.name + "' has no gradient");
  }
}

}  // namespace

void Parameter::zero_grad() {
  grad = Matrix::zeros_like(value);
  has_grad = false;
}

Matrix row_softmax(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto src = m.row(r);
    auto dst = out.row(r);
    const double mx = *std::max_element(src.begin(), src.end());
    double z = 0.0;
    for (std::size_t j = 0; j < src.size(); ++j) z += dst[j] = std::exp(src[j] - mx);
    for (double& v : dst) v /= z;
  }
  return out;
}

Var Tape::push(Matrix value, bool requires_grad, std::function<void(Tape&, std::size_t)> bw,
               const char* op) {
  if (!value.all_finite()) throw NumericError(std::string(op) + ": non-finite value");
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(bw);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Matrix& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.grad.same_shape(n.value)) n.grad = Matrix::zeros_like(n.value);
  return n.grad;
}

Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr, "constant"); }

Var Tape::variable(Matrix value) {
  Var v = push(std::move(value), true, [](Tape&, std::size_t) {}, "variable");
  nodes_[v.id].is_leaf = true;
  nodes_[v.id].grad = Matrix::zeros_like(nodes_[v.id].value);
  return v;
}

Var Tape::parameter(Parameter& p) {
  Var v = push(p.value, true, [](Tape&, std::size_t) {}, "parameter");
  nodes_[v.id].is_leaf = true;
  nodes_[v.id].sink = &p;
  return v;
}

Var Tape::matmul(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (A.cols() != B.rows()) throw ShapeError("matmul: " + shape_str(A) + " * " + shape_str(B));
  Matrix C(A.rows(), B.cols());
  for (std::size_t i = 0; i < A.rows(); ++i) {
    auto c = C.row(i);
    for (std::size_t k = 0; k < A.cols(); ++k) {
      const double aik = A(i, k);
      if (aik == 0.0) continue;
      auto brow = B.row(k);
      for (std::size_t j = 0; j < c.size(); ++j) c[j] += aik * brow[j];
    }
  }
  return push(std::move(C), needs(a) || needs(b), [a, b](Tape& t, std::size_t self) {
    const Matrix& G = t.nodes_[self].grad;
    const Matrix& A = t.value(a);
    const Matrix& B = t.value(b);
    if (t.needs(a)) {
      Matrix& gA = t.grad_buffer(a.id);  // G * B^T
      for (std::size_t i = 0; i < G.rows(); ++i)
        for (std::size_t k = 0; k < B.rows(); ++k) {
          double s = 0.0;
          for (std::size_t j = 0; j < G.cols(); ++j) s += G(i, j) * B(k, j);
          gA(i, k) += s;
        }
    }
    if (t.needs(b)) {
      Matrix& gB = t.grad_buffer(b.id);  // A^T * G
      for (std::size_t i = 0; i < A.rows(); ++i)
        for (std::size_t k = 0; k < A.cols(); ++k) {
          const double aik = A(i, k);
          if (aik == 0.0) continue;
          auto grow = G.row(i);
          auto dst = gB.row(k);
          for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += aik * grow[j];
        }
    }
  }, "matmul");
}

Var Tape::spmm(const SparseMatrix& s, Var dense) {
  const SparseMatrix* sp = &s;
  return push(s.multiply(value(dense)), needs(dense), [sp, dense](Tape& t, std::size_t self) {
    const Matrix& G = t.nodes_[self].grad;
    Matrix& gD = t.grad_buffer(dense.id);
    // S^T * G, scattered row by row in a fixed order.
    for (std::size_t r = 0; r < sp->rows(); ++r) {
      auto cols = sp->row_cols(r);
      auto vals = sp->row_values(r);
      auto grow = G.row(r);
      for (std::size_t k = 0; k < cols.size(); ++k) {
        auto dst = gD.row(cols[k]);
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += vals[k] * grow[j];
      }
    }
  }, "spmm");
}

Var Tape::add(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  const bool broadcast = B.rows() == 1 && A.rows() != 1 && B.cols() == A.cols();
  if (!A.same_shape(B) && !broadcast) throw ShapeError("add: " + shape_str(A) + " + " + shape_str(B));
  Matrix C = A;
  for (std::size_t i = 0; i < C.rows(); ++i) {
    auto brow = B.row(broadcast ? 0 : i);
    auto c = C.row(i);
    for (std::size_t j = 0; j < c.size(); ++j) c[j] += brow[j];
  }
  return push(std::move(C), needs(a) || needs(b), [a, b, broadcast](Tape& t, std::size_t self) {
    const Matrix& G = t.nodes_[self].grad;
    if (t.needs(a)) {
      Matrix& gA = t.grad_buffer(a.id);
      for (std::size_t k = 0; k < G.size(); ++k) gA.data()[k] += G.data()[k];
    }
    if (t.needs(b)) {
      Matrix& gB = t.grad_buffer(b.id);
      for (std::size_t i = 0; i < G.rows(); ++i) {
        auto dst = gB.row(broadcast ? 0 : i);
        auto src = G.row(i);
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
      }
    }
  }, "add");
}

Var Tape::hadamard(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (!A.same_shape(B)) throw ShapeError("hadamard: " + shape_str(A) + " vs " + shape_str(B));
  Matrix C = A;
  for (std::size_t k = 0; k < C.size(); ++k) C.data()[k] *= B.data()[k];
  return push(std::move(C), needs(a) || needs(b), [a, b](Tape& t, std::size_t self) {
    const Matrix& G = t.nodes_[self].grad;
    if (t.needs(a)) {
      Matrix& gA = t.grad_buffer(a.id);
      const Matrix& B = t.value(b);
      for (std::size_t k = 0; k < G.size(); ++k) gA.data()[k] += G.data()[k] * B.data()[k];
    }
    if (t.needs(b)) {
      Matrix& gB = t.grad_buffer(b.id);
      const Matrix& A = t.value(a);
      for (std::size_t k = 0; k < G.size(); ++k) gB.data()[k] += G.data()[k] * A.data()[k];
    }
  }, "hadamard");
}

Var Tape::relu(Var a) {
  Matrix C = value(a);
  for (double& v : C.data()) v = v > 0.0 ? v : 0.0;
  return push(std::move(C), needs(a), [a](Tape& t, std::size_t self) {
    const Matrix& G = t.nodes_[self].grad;
    const Matrix& A = t.value(a);
    Matrix& gA = t.grad_buffer(a.id);
    for (std::size_t k = 0; k < G.size(); ++k)
      if (A.data()[k] > 0.0) gA.data()[k] += G.data()[k];
  }, "relu");
}

Var Tape::sigmoid(Var a) {
  Matrix C = value(a);
  for (double& v : C.data()) v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  return push(std::move(C), needs(a), [a](Tape& t, std::size_t self) {
    const Matrix& G = t.nodes_[self].grad;
    const Matrix& Y = t.nodes_[self].value;
    Matrix& gA = t.grad_buffer(a.id);
    for (std::size_t k = 0; k < G.size(); ++k) {
      const double y = Y.data()[k];
      gA.data()[k] += G.data()[k] * y * (1.0 - y);
    }
  }, "sigmoid");
}

Var Tape::row_softmax(Var a) {
  return push(adedgedrop::row_softmax(value(a)), needs(a), [a](Tape& t, std::size_t self) {
    const Matrix& G = t.nodes_[self].grad;
    const Matrix& Y = t.nodes_[self].value;
    Matrix& gA = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < Y.rows(); ++i) {
      auto y = Y.row(i);
      auto g = G.row(i);
      double dot = 0.0;
      for (std::size_t j = 0; j < y.size(); ++j) dot += g[j] * y[j];
      auto dst = gA.row(i);
      for (std::size_t j = 0; j < y.size(); ++j) dst[j] += y[j] * (g[j] - dot);
    }
  }, "row_softmax");
}

Var Tape::sum(Var a) {
  double s = 0.0;
  for (double v : value(a).data()) s += v;
  return push(Matrix{{s}}, needs(a), [a](Tape& t, std::size_t self) {
    const double g = t.nodes_[self].grad(0, 0);
    Matrix& gA = t.grad_buffer(a.id);
    for (double& v : gA.data()) v += g;
  }, "sum");
}

Var Tape::nll(Var probs, std::span<const std::size_t> rows, std::span<const std::size_t> cols,
              double scale) {
  if (rows.size() != cols.size()) throw ShapeError("nll: rows/cols length mismatch");
  const Matrix& P = value(probs);
  double s = 0.0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] >= P.rows() || cols[k] >= P.cols()) throw ShapeError("nll: index out of range");
    s -= std::log(std::max(P(rows[k], cols[k]), kProbFloor));
  }
  std::vector<std::size_t> r(rows.begin(), rows.end());
  std::vector<std::size_t> c(cols.begin(), cols.end());
  return push(Matrix{{scale * s}}, needs(probs),
              [probs, r = std::move(r), c = std::move(c), scale](Tape& t, std::size_t self) {
    const double g = t.nodes_[self].grad(0, 0);
    const Matrix& P = t.value(probs);
    Matrix& gP = t.grad_buffer(probs.id);
    for (std::size_t k = 0; k < r.size(); ++k) {
      const double p = P(r[k], c[k]);
      if (p > kProbFloor) gP(r[k], c[k]) -= g * scale / p;
    }
  }, "nll");
}

void Tape::backward(Var loss) {
  const Node& root = nodes_.at(loss.id);
  if (root.value.rows() != 1 || root.value.cols() != 1) {
    throw ContractError("backward: loss must be 1x1, got " + shape_str(root.value));
  }
  if (!root.requires_grad) return;
  for (std::size_t i = 0; i <= loss.id; ++i) {
    Node& n = nodes_[i];
    if ((n.requires_grad && !n.is_leaf) || n.sink) n.grad = Matrix();
  }
  grad_buffer(loss.id)(0, 0) = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, i);
    if (n.sink) {
      Parameter& p = *n.sink;
      if (!p.grad.same_shape(p.value)) p.grad = Matrix::zeros_like(p.value);
      for (std::size_t k = 0; k < p.grad.size(); ++k) p.grad.data()[k] += n.grad.data()[k];
      p.has_grad = true;
    }
  }
  for (std::size_t i = 0; i <= loss.id; ++i) {
    Node& n = nodes_[i];
    if (!n.grad.empty() && !n.grad.all_finite()) throw NumericError("backward: non-finite gradient");
  }
}

void sgd_step(std::span<Parameter* const> params, double lr) {
  for (Parameter* p : params) require_grad_present(*p);
  for (Parameter* p : params) {
    for (std::size_t k = 0; k < p->value.size(); ++k) p->value.data()[k] -= lr * p->grad.data()[k];
    p->zero_grad();
  }
}

void adam_step(std::span<Parameter* const> params, const AdamOptions& opt) {
  for (Parameter* p : params) require_grad_present(*p);
  for (Parameter* p : params) {
    if (!p->adam_m.same_shape(p->value)) {
      p->adam_m = Matrix::zeros_like(p->value);
      p->adam_v = Matrix::zeros_like(p->value);
      p->adam_step = 0;
    }
    ++p->adam_step;
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(p->adam_step));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(p->adam_step));
    for (std::size_t k = 0; k < p->value.size(); ++k) {
      const double g = p->grad.data()[k];
      double& m = p->adam_m.data()[k];
      double& v = p->adam_v.data()[k];
      m = opt.beta1 * m + (1.0 - opt.beta1) * g;
      v = opt.beta2 * v + (1.0 - opt.beta2) * g * g;
      p->value.data()[k] -= opt.lr * (m / bc1) / (std::sqrt(v / bc2) + opt.eps);
    }
    p->zero_grad();
  }
}

void scale_grads(std::span<Parameter* const> params, double factor) {
  for (Parameter* p : params)
    for (double& g : p->grad.data()) g *= factor;
}

}  // namespace adedgedrop
