#ifndef ADEDGEDROP_SUPERVISION_HPP
#define ADEDGEDROP_SUPERVISION_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "adedgedrop/graph.hpp"

namespace adedgedrop {

/// Gaussian-kernel similarity of the endpoints of each edge, in edge order.
struct EdgeSimilarity {
  std::vector<double> values;
  double sigma = 1.0;
  bool sigma_from_median = false;
};

/// exp(-||X_i - X_j||^2 / (2 sigma^2)) per edge. Without an explicit sigma the
/// median endpoint distance over all edges is used (falls back to 1 when that
/// median is 0).
EdgeSimilarity gaussian_similarity(const FeatureMatrix& x, std::span<const Edge> edges,
                                   std::optional<double> sigma = std::nullopt);

/// Binary per-edge target: S_p = 1 iff sim_p >= mu.
struct SupervisionSignal {
  std::vector<std::uint8_t> positive;
  std::size_t kappa = 0;

  bool degenerate() const noexcept { return kappa == 0; }
  /// Indices p with S_p = 1, ascending.
  std::vector<std::size_t> positive_rows() const;
};

SupervisionSignal build_supervision(std::span<const double> similarity, double mu);

/// Similarity-based pruning: M_p = 1 iff sim_p >= p_pre.
struct PreDropMask {
  std::vector<std::uint8_t> keep;
  double rate = 0.0;
};

struct PreDropResult {
  PreDropMask mask;
  Graph reduced;                       ///< graph on the surviving edges
  std::vector<EdgeId> surviving;       ///< original ids of reduced.edges(), same order
  std::vector<EdgeId> removed;         ///< original ids of pruned edges
};

PreDropResult pre_drop(const Graph& g, const EdgeSimilarity& sim, double p_pre);

}  // namespace adedgedrop

#endif  // ADEDGEDROP_SUPERVISION_HPP
