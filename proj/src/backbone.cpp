#include "adedgedrop/backbone.hpp"

#include <cmath>
#include <vector>

#include "adedgedrop/error.hpp"
#include "adedgedrop/random.hpp"

namespace adedgedrop {
namespace {

Matrix glorot(std::size_t rows, std::size_t cols, Rng& rng) {
  const double r = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> ud(-r, r);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = ud(rng);
  return m;
}

void check_prop(const SparseMatrix& prop, std::size_t rows) {
  if (prop.rows() != rows || prop.cols() != rows) {
    throw ShapeError("gcn_forward: propagation matrix is " + std::to_string(prop.rows()) + "x" +
                     std::to_string(prop.cols()) + " for " + std::to_string(rows) + " nodes");
  }
}

}  // namespace

GcnParams init_gcn(std::size_t in_dim, std::size_t hidden, std::size_t out_dim, std::uint64_t seed,
                   std::uint64_t stream, const std::string& name) {
  if (in_dim == 0 || hidden == 0 || out_dim == 0) throw ContractError("init_gcn: zero dimension");
  Rng rng = make_rng(seed, stream);
  GcnParams p;
  p.w1 = Parameter(name + ".w1", glorot(in_dim, hidden, rng));
  p.w2 = Parameter(name + ".w2", glorot(hidden, out_dim, rng));
  return p;
}

Var gcn_forward(Tape& tape, GcnParams& params, Var x, const SparseMatrix& prop) {
  check_prop(prop, tape.value(x).rows());
  Var w1 = tape.parameter(params.w1);
  Var w2 = tape.parameter(params.w2);
  Var h = tape.relu(tape.spmm(prop, tape.matmul(x, w1)));
  return tape.spmm(prop, tape.matmul(h, w2));
}

Matrix gcn_infer(const GcnParams& params, const Matrix& x, const SparseMatrix& prop) {
  Tape tape;
  GcnParams copy = params;
  return tape.value(gcn_forward(tape, copy, tape.constant(x), prop));
}

Var classification_loss(Tape& tape, Var logits, const LabelSplit& labels) {
  if (labels.train.empty()) throw ContractError("classification_loss: empty training set");
  const Matrix& z = tape.value(logits);
  std::vector<std::size_t> rows(labels.train.begin(), labels.train.end());
  std::vector<std::size_t> cols(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] >= z.rows()) throw ShapeError("classification_loss: training node outside logits");
    const int y = labels.labels[rows[k]];
    if (y < 0 || static_cast<std::size_t>(y) >= z.cols()) {
      throw ContractError("classification_loss: training node without a valid label");
    }
    cols[k] = static_cast<std::size_t>(y);
  }
  return tape.nll(tape.row_softmax(logits), rows, cols, 1.0);
}

double accuracy(const Matrix& logits, const LabelSplit& labels, SplitKind which) {
  auto nodes = labels.nodes(which);
  if (nodes.empty()) throw ContractError("accuracy: empty node set");
  std::size_t correct = 0;
  for (NodeId v : nodes) {
    auto row = logits.row(v);
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j)
      if (row[j] > row[best]) best = j;
    if (static_cast<int>(best) == labels.labels[v]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(nodes.size());
}

}  // namespace adedgedrop
