#include "adedgedrop/linegraph.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "adedgedrop/error.hpp"
#include "adedgedrop/log.hpp"
#include "adedgedrop/random.hpp"
#include "adedgedrop/tensor.hpp"

namespace adedgedrop {
namespace {

constexpr int kPowerIterations = 2;
constexpr std::size_t kOversample = 10;
constexpr double kRankTolerance = 1e-10;

Eigen::MatrixXd gaussian(std::size_t rows, std::size_t cols, Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  // Fill in row-major order so the draw sequence does not depend on Eigen's layout.
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = nd(rng);
  return m;
}

Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& y) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
  return qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), y.cols());
}

}  // namespace

std::optional<std::size_t> LineGraph::node_of_edge(Edge e) const {
  if (e.u > e.v) std::swap(e.u, e.v);
  auto it = std::lower_bound(edge_of_node_.begin(), edge_of_node_.end(), e);
  if (it == edge_of_node_.end() || *it != e) return std::nullopt;
  return static_cast<std::size_t>(it - edge_of_node_.begin());
}

LineGraph build_line_graph(const Graph& g) {
  LineGraph lg;
  lg.edge_of_node_.assign(g.edges().begin(), g.edges().end());
  const std::size_t m = lg.edge_of_node_.size();

  std::vector<std::vector<std::size_t>> incident(g.num_nodes());
  for (std::size_t p = 0; p < m; ++p) {
    incident[lg.edge_of_node_[p].u].push_back(p);
    incident[lg.edge_of_node_[p].v].push_back(p);
  }
  // Two distinct simple edges share at most one endpoint, so each line-graph
  // edge is produced by exactly one bucket.
  std::vector<std::vector<std::size_t>> nbrs(m);
  for (const auto& bucket : incident) {
    for (std::size_t a = 0; a < bucket.size(); ++a)
      for (std::size_t b = a + 1; b < bucket.size(); ++b) {
        nbrs[bucket[a]].push_back(bucket[b]);
        nbrs[bucket[b]].push_back(bucket[a]);
      }
  }
  std::vector<std::size_t> ptr(m + 1, 0), idx;
  for (std::size_t p = 0; p < m; ++p) {
    std::sort(nbrs[p].begin(), nbrs[p].end());
    idx.insert(idx.end(), nbrs[p].begin(), nbrs[p].end());
    ptr[p + 1] = idx.size();
  }
  std::vector<double> val(idx.size(), 1.0);
  lg.adjacency_ = SparseMatrix(m, m, std::move(ptr), std::move(idx), std::move(val));
  return lg;
}

Matrix reduce_features(const FeatureMatrix& x, std::size_t dims, std::uint64_t seed,
                       InitFeaturesReport* report) {
  const std::size_t n = x.rows();
  const std::size_t m = x.cols();
  if (dims == 0) throw ContractError("reduce_features: target dimension must be positive");
  Rng rng = make_rng(seed, streams::kLineFeatures);
  Eigen::MatrixXd X(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) X(i, j) = x(i, j);

  InitFeaturesReport local;
  Eigen::MatrixXd reduced;
  const std::size_t sketch = std::min(dims + kOversample, std::min(n, m));
  if (sketch > 0) {
    Eigen::MatrixXd q = orthonormal_basis(X * gaussian(m, sketch, rng));
    for (int it = 0; it < kPowerIterations; ++it) {
      Eigen::MatrixXd z = orthonormal_basis(X.transpose() * q);
      q = orthonormal_basis(X * z);
    }
    Eigen::MatrixXd b = q.transpose() * X;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    const double top = s.size() > 0 ? s(0) : 0.0;
    for (Eigen::Index k = 0; k < s.size(); ++k)
      if (top > 0.0 && s(k) > kRankTolerance * top) ++local.feature_rank;
    if (local.feature_rank >= dims) {
      Eigen::MatrixXd v = svd.matrixV().leftCols(static_cast<Eigen::Index>(dims));
      for (Eigen::Index k = 0; k < v.cols(); ++k) {
        Eigen::Index arg = 0;
        v.col(k).cwiseAbs().maxCoeff(&arg);
        if (v(arg, k) < 0.0) v.col(k) *= -1.0;
      }
      reduced = X * v;
    }
  }
  if (reduced.size() == 0 && n > 0) {
    local.used_random_projection = true;
    log::warn("feature rank " + std::to_string(local.feature_rank) + " below " +
              std::to_string(dims) + "; using a random projection for line-graph features");
    reduced = X * gaussian(m, dims, rng) / std::sqrt(static_cast<double>(dims));
  }
  Matrix out(n, dims);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dims; ++j) out(i, j) = reduced(i, j);
  if (report) *report = local;
  return out;
}

LineGraphFeatures init_features(const Graph& g, const FeatureMatrix& x, std::size_t num_classes,
                                std::uint64_t seed, InitFeaturesReport* report) {
  if (num_classes < 2) throw ContractError("init_features: need at least 2 classes");
  if (x.rows() != g.num_nodes()) throw ShapeError("init_features: feature rows != num_nodes");
  const Matrix r = reduce_features(x, num_classes, seed, report);
  LineGraphFeatures out;
  out.values = Matrix(g.num_edges(), 2 * num_classes);
  for (std::size_t p = 0; p < g.num_edges(); ++p) {
    const Edge e = g.edges()[p];
    auto dst = out.values.row(p);
    std::copy(r.row(e.u).begin(), r.row(e.u).end(), dst.begin());
    std::copy(r.row(e.v).begin(), r.row(e.v).end(), dst.begin() + static_cast<std::ptrdiff_t>(num_classes));
  }
  return out;
}

LineGraphFeatures update_features(const LineGraphFeatures& prev, std::span<const Edge> edges,
                                  const Matrix& z, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ContractError("update_features: alpha must lie in [0, 1]");
  if (prev.values.rows() != edges.size()) throw ShapeError("update_features: one row per edge expected");
  const std::size_t c = z.cols();
  if (prev.values.cols() != 2 * c) {
    throw ShapeError("update_features: embedding width " + std::to_string(c) +
                     " does not match feature width " + std::to_string(prev.values.cols()));
  }
  Matrix cat(edges.size(), 2 * c);
  for (std::size_t p = 0; p < edges.size(); ++p) {
    auto dst = cat.row(p);
    std::copy(z.row(edges[p].u).begin(), z.row(edges[p].u).end(), dst.begin());
    std::copy(z.row(edges[p].v).begin(), z.row(edges[p].v).end(), dst.begin() + static_cast<std::ptrdiff_t>(c));
  }
  const Matrix soft = row_softmax(cat);
  LineGraphFeatures out{prev.values, prev.epoch_stamp + 1};
  if (alpha == 1.0) return out;
  for (std::size_t k = 0; k < out.values.size(); ++k) {
    out.values.data()[k] = alpha * prev.values.data()[k] + (1.0 - alpha) * soft.data()[k];
  }
  return out;
}

}  // namespace adedgedrop
