#include "adedgedrop/adversary.hpp"

#include <algorithm>

#include "adedgedrop/error.hpp"
#include "adedgedrop/random.hpp"

namespace adedgedrop {

EdgePredictorParams init_edge_predictor(std::size_t num_classes, std::size_t hidden,
                                        std::uint64_t seed) {
  return init_gcn(2 * num_classes, hidden, 2, seed, streams::kOmegaInit, "omega");
}

Perturbation init_perturbation(std::size_t rows, double epsilon, std::uint64_t seed,
                               std::uint64_t stream) {
  if (!(epsilon >= 0.0)) throw ContractError("init_perturbation: epsilon must be non-negative");
  Perturbation p{Matrix(rows, 2), epsilon};
  if (epsilon == 0.0) return p;
  Rng rng = make_rng(seed, stream);
  std::uniform_real_distribution<double> ud(-epsilon, epsilon);
  for (double& v : p.delta.data()) v = std::clamp(ud(rng), -epsilon, epsilon);
  return p;
}

Perturbation pgd_step(const Perturbation& delta, const Matrix& grad_delta, double gamma) {
  if (!delta.delta.same_shape(grad_delta)) throw ShapeError("pgd_step: gradient shape mismatch");
  Perturbation out = delta;
  const double eps = delta.epsilon;
  for (std::size_t k = 0; k < out.delta.size(); ++k) {
    const double g = grad_delta.data()[k];
    const double sign = g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0);
    out.delta.data()[k] = std::clamp(out.delta.data()[k] + gamma * sign, -eps, eps);
  }
  return out;
}

EdgePrediction predict_edges(Tape& tape, EdgePredictorParams& omega, const LineGraphFeatures& x_lg,
                             const SparseMatrix& a_lg_prop, const Perturbation& delta) {
  if (x_lg.values.cols() != omega.in_dim()) throw ShapeError("predict_edges: feature width mismatch");
  if (omega.out_dim() != 2) throw ShapeError("predict_edges: predictor must emit 2 logits");
  if (delta.delta.rows() != x_lg.values.rows() || delta.delta.cols() != 2) {
    throw ShapeError("predict_edges: perturbation shape mismatch");
  }
  EdgePrediction out;
  Var raw = gcn_forward(tape, omega, tape.constant(x_lg.values), a_lg_prop);
  out.delta = tape.variable(delta.delta);
  out.logits = tape.add(raw, out.delta);
  const Matrix probs = row_softmax(tape.value(out.logits));
  out.keep_prob.resize(probs.rows());
  for (std::size_t p = 0; p < probs.rows(); ++p) out.keep_prob[p] = probs(p, kKeepColumn);
  return out;
}

EdgeMask compute_mask(std::span<const double> keep_prob, double mu) {
  if (!(mu >= 0.0 && mu <= 1.0)) throw ContractError("compute_mask: mu must lie in [0, 1]");
  EdgeMask m;
  m.keep.resize(keep_prob.size());
  for (std::size_t p = 0; p < keep_prob.size(); ++p) {
    m.keep[p] = keep_prob[p] >= mu ? 1 : 0;
    m.keep_count += m.keep[p];
  }
  return m;
}

CorruptedAdjacency corrupt_adjacency(const Graph& g, const EdgeMask& mask, int epoch, int step) {
  return CorruptedAdjacency{g.subgraph(mask.keep), epoch, step};
}

Var line_graph_loss(Tape& tape, Var z_lg, const SupervisionSignal& s, LineGraphLossKind kind) {
  if (s.degenerate()) throw ContractError("line_graph_loss: no positive edges (kappa = 0)");
  if (tape.value(z_lg).rows() != s.positive.size() || tape.value(z_lg).cols() != 2) {
    throw ShapeError("line_graph_loss: logits do not match supervision");
  }
  std::vector<std::size_t> rows;
  std::vector<std::size_t> cols;
  if (kind == LineGraphLossKind::positive_only) {
    rows = s.positive_rows();
    cols.assign(rows.size(), kKeepColumn);
  } else {
    rows.resize(s.positive.size());
    cols.resize(s.positive.size());
    for (std::size_t p = 0; p < rows.size(); ++p) {
      rows[p] = p;
      cols[p] = s.positive[p] ? kKeepColumn : 1 - kKeepColumn;
    }
  }
  return tape.nll(tape.row_softmax(z_lg), rows, cols, 1.0 / static_cast<double>(s.kappa));
}

}  // namespace adedgedrop
