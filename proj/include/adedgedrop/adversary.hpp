#ifndef ADEDGEDROP_ADVERSARY_HPP
#define ADEDGEDROP_ADVERSARY_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "adedgedrop/backbone.hpp"
#include "adedgedrop/graph.hpp"
#include "adedgedrop/linegraph.hpp"
#include "adedgedrop/supervision.hpp"
#include "adedgedrop/tensor.hpp"

namespace adedgedrop {

/// Edge predictor weights: a GCN over the line graph with input width 2c and
/// two outputs, column 0 = keep, column 1 = drop.
using EdgePredictorParams = GcnParams;

inline constexpr std::size_t kKeepColumn = 0;

EdgePredictorParams init_edge_predictor(std::size_t num_classes, std::size_t hidden,
                                        std::uint64_t seed);

/// Additive adversarial offset on predictor logits, kept in the l-inf ball of
/// radius epsilon.
struct Perturbation {
  Matrix delta;
  double epsilon = 0.0;
};

/// Entries uniform on [-epsilon, epsilon]; all zeros for epsilon = 0.
Perturbation init_perturbation(std::size_t rows, double epsilon, std::uint64_t seed,
                               std::uint64_t stream);

/// delta <- clip(delta + gamma * sign(grad), -epsilon, epsilon), sign(0) = 0.
Perturbation pgd_step(const Perturbation& delta, const Matrix& grad_delta, double gamma);

struct EdgePrediction {
  Var logits;                    ///< f_omega(X_lg, A_lg) + delta
  Var delta;                     ///< leaf holding the perturbation
  std::vector<double> keep_prob; ///< softmax(logits)[:, keep]
};

/// Runs the predictor and adds the perturbation as a requires-grad leaf.
EdgePrediction predict_edges(Tape& tape, EdgePredictorParams& omega, const LineGraphFeatures& x_lg,
                             const SparseMatrix& a_lg_prop, const Perturbation& delta);

struct EdgeMask {
  std::vector<std::uint8_t> keep;
  std::size_t keep_count = 0;
};

/// keep_p = 1 iff keep_prob_p >= mu.
EdgeMask compute_mask(std::span<const double> keep_prob, double mu);

struct CorruptedAdjacency {
  Graph graph;       ///< surviving edges only
  int epoch = 0;
  int step = 0;
};

/// Keeps both directed entries of edge p iff mask.keep[p].
CorruptedAdjacency corrupt_adjacency(const Graph& g, const EdgeMask& mask, int epoch = 0, int step = 0);

enum class LineGraphLossKind {
  positive_only,  ///< only S_p = 1 rows contribute
  two_sided,      ///< S_p = 0 rows also contribute -ln softmax(z_lg)[p, drop]
};

/// -(1/kappa) sum_{p: S_p = 1} ln softmax(z_lg)[p, keep], probabilities
/// floored at 1e-12. The two-sided form adds the drop-column terms of the
/// negatives under the same 1/kappa scale. Throws ContractError when kappa = 0.
Var line_graph_loss(Tape& tape, Var z_lg, const SupervisionSignal& s,
                    LineGraphLossKind kind = LineGraphLossKind::positive_only);

}  // namespace adedgedrop

#endif  // ADEDGEDROP_ADVERSARY_HPP
