#ifndef ADEDGEDROP_LINEGRAPH_HPP
#define ADEDGEDROP_LINEGRAPH_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "adedgedrop/graph.hpp"
#include "adedgedrop/matrix.hpp"
#include "adedgedrop/sparse.hpp"

namespace adedgedrop {

/// Edge adjacency structure of an undirected graph: one node per undirected
/// edge, two nodes adjacent when their edges share exactly one endpoint.
/// Line-graph node p is edge p of the source graph's canonical edge list.
class LineGraph {
 public:
  std::size_t num_nodes() const noexcept { return edge_of_node_.size(); }
  std::size_t num_edges() const noexcept { return adjacency_.nnz() / 2; }
  const SparseMatrix& adjacency() const noexcept { return adjacency_; }
  Edge edge_of_node(std::size_t p) const { return edge_of_node_.at(p); }
  std::span<const Edge> edges() const noexcept { return edge_of_node_; }
  std::optional<std::size_t> node_of_edge(Edge e) const;
  /// True when the source graph had no edges.
  bool empty() const noexcept { return edge_of_node_.empty(); }

  friend LineGraph build_line_graph(const Graph& g);

 private:
  std::vector<Edge> edge_of_node_;
  SparseMatrix adjacency_;
};

/// O(sum_i d_i^2) construction through per-node incidence buckets.
LineGraph build_line_graph(const Graph& g);

/// Line-graph node features, |E| x 2c.
struct LineGraphFeatures {
  Matrix values;
  int epoch_stamp = 0;
};

struct InitFeaturesReport {
  bool used_random_projection = false;
  std::size_t feature_rank = 0;
};

/// Reduces X to c columns with a seeded randomized truncated SVD (rank c,
/// power iterations) and concatenates the reduced endpoint rows of every edge
/// in (i, j), i < j order. Falls back to a seeded Gaussian random projection
/// when X has numerical rank below c.
LineGraphFeatures init_features(const Graph& g, const FeatureMatrix& x, std::size_t num_classes,
                                std::uint64_t seed, InitFeaturesReport* report = nullptr);

/// The dimensionality reducer behind init_features, exposed for testing.
Matrix reduce_features(const FeatureMatrix& x, std::size_t dims, std::uint64_t seed,
                       InitFeaturesReport* report = nullptr);

/// Row p <- alpha * prev_p + (1 - alpha) * softmax(concat(Z_i, Z_j)), the
/// softmax taken jointly over the 2c entries.
LineGraphFeatures update_features(const LineGraphFeatures& prev, std::span<const Edge> edges,
                                  const Matrix& z, double alpha);

}  // namespace adedgedrop

#endif  // ADEDGEDROP_LINEGRAPH_HPP
