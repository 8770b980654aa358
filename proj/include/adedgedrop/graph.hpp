#ifndef ADEDGEDROP_GRAPH_HPP
#define ADEDGEDROP_GRAPH_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "adedgedrop/matrix.hpp"
#include "adedgedrop/sparse.hpp"

namespace adedgedrop {

using NodeId = std::size_t;
using EdgeId = std::size_t;

/// Undirected edge in canonical orientation (u < v).
struct Edge {
  NodeId u = 0;
  NodeId v = 0;

  auto operator<=>(const Edge&) const = default;
};

/// Counts of input lines that did not become new edges.
struct LoadReport {
  std::size_t merged_duplicates = 0;  ///< repeated or reversed copies of an existing edge
  std::size_t self_loops_dropped = 0;
};

/// Undirected simple graph. The canonical edge list is sorted lexicographically
/// and an edge's position in it is its EdgeId. The CSR adjacency stores both
/// directions of every edge with value 1 and never stores self-loops.
class Graph {
 public:
  Graph() = default;

  /// Canonicalizes, deduplicates and drops self-loops. Throws ContractError
  /// on endpoints >= num_nodes.
  static Graph from_edges(std::size_t num_nodes, std::span<const Edge> edges,
                          LoadReport* report = nullptr);

  std::size_t num_nodes() const noexcept { return num_nodes_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  std::span<const Edge> edges() const noexcept { return edges_; }
  std::span<const std::size_t> degrees() const noexcept { return degrees_; }
  const SparseMatrix& adjacency() const noexcept { return adjacency_; }

  std::optional<EdgeId> edge_id(NodeId a, NodeId b) const;
  bool has_edge(NodeId a, NodeId b) const { return edge_id(a, b).has_value(); }

  /// Graph on the same node set containing the edges with keep[e] != 0.
  Graph subgraph(std::span<const std::uint8_t> keep) const;

  bool operator==(const Graph& o) const = default;

 private:
  std::size_t num_nodes_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> degrees_;
  SparseMatrix adjacency_;
};

/// Dense n x m node feature matrix.
using FeatureMatrix = Matrix;

enum class SplitKind { train, val, test };

/// Node labels plus disjoint train/val/test node lists. Unlabeled nodes carry -1.
struct LabelSplit {
  std::vector<int> labels;
  std::size_t num_classes = 0;
  std::vector<NodeId> train;
  std::vector<NodeId> val;
  std::vector<NodeId> test;

  std::span<const NodeId> nodes(SplitKind which) const;
  /// Checks disjointness, label ranges and that masked nodes are labeled.
  void validate() const;
};

/// Reads "u<TAB>v" lines ('#' comments and blank lines skipped).
Graph load_graph(const std::filesystem::path& edge_file, std::size_t num_nodes,
                 LoadReport* report = nullptr);
/// Reads "node<TAB>f1<TAB>...<TAB>fm" lines. Every node 0..n-1 must appear exactly once.
FeatureMatrix load_features(const std::filesystem::path& file);
/// Reads labels.tsv and splits.tsv. num_classes is inferred as max label + 1.
LabelSplit load_labels(const std::filesystem::path& labels_file,
                       const std::filesystem::path& splits_file, std::size_t num_nodes);

void write_edges(const std::filesystem::path& file, std::span<const Edge> edges);
void write_features(const std::filesystem::path& file, const FeatureMatrix& x);
void write_labels(const std::filesystem::path& labels_file,
                  const std::filesystem::path& splits_file, const LabelSplit& labels);

/// D^-1/2 (A + I) D^-1/2 with D the degree matrix of A + I. `adj` must be a
/// symmetric 0/1 pattern without self-loops.
SparseMatrix normalize_adjacency(const SparseMatrix& adj);

}  // namespace adedgedrop

#endif  // ADEDGEDROP_GRAPH_HPP
