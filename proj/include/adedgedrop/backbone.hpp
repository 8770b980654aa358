#ifndef ADEDGEDROP_BACKBONE_HPP
#define ADEDGEDROP_BACKBONE_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

#include "adedgedrop/graph.hpp"
#include "adedgedrop/sparse.hpp"
#include "adedgedrop/tensor.hpp"

namespace adedgedrop {

/// Two-layer GCN weights: W1 is in x hidden, W2 is hidden x out. No biases.
struct GcnParams {
  Parameter w1;
  Parameter w2;

  std::size_t in_dim() const noexcept { return w1.value.rows(); }
  std::size_t hidden() const noexcept { return w1.value.cols(); }
  std::size_t out_dim() const noexcept { return w2.value.cols(); }
  std::array<Parameter*, 2> list() { return {&w1, &w2}; }
};

/// Glorot-uniform initialization, +-sqrt(6 / (fan_in + fan_out)), drawn from
/// (seed, stream).
GcnParams init_gcn(std::size_t in_dim, std::size_t hidden, std::size_t out_dim, std::uint64_t seed,
                   std::uint64_t stream, const std::string& name);

/// logits = P relu(P X W1) W2, recorded on the tape. P must be n x n and
/// outlive the tape.
Var gcn_forward(Tape& tape, GcnParams& params, Var x, const SparseMatrix& prop);

/// Same computation without a tape.
Matrix gcn_infer(const GcnParams& params, const Matrix& x, const SparseMatrix& prop);

/// -sum_{i in train} ln softmax(logits)_{i, y_i}, probabilities floored at 1e-12.
/// Summed over training nodes, not averaged.
Var classification_loss(Tape& tape, Var logits, const LabelSplit& labels);

/// Fraction of nodes in `which` whose argmax logit (lowest index on ties)
/// equals the label.
double accuracy(const Matrix& logits, const LabelSplit& labels, SplitKind which);

}  // namespace adedgedrop

#endif  // ADEDGEDROP_BACKBONE_HPP
