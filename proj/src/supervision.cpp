#include "adedgedrop/supervision.hpp"

#include <algorithm>
#include <cmath>

#include "adedgedrop/error.hpp"
#include "adedgedrop/log.hpp"

namespace adedgedrop {

EdgeSimilarity gaussian_similarity(const FeatureMatrix& x, std::span<const Edge> edges,
                                   std::optional<double> sigma) {
  std::vector<double> sq(edges.size());
  for (std::size_t p = 0; p < edges.size(); ++p) {
    if (edges[p].u >= x.rows() || edges[p].v >= x.rows()) {
      throw ContractError("gaussian_similarity: edge endpoint outside the feature matrix");
    }
    auto a = x.row(edges[p].u);
    auto b = x.row(edges[p].v);
    double d = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) d += (a[j] - b[j]) * (a[j] - b[j]);
    sq[p] = d;
  }
  EdgeSimilarity out;
  if (sigma) {
    if (!(*sigma > 0.0) || !std::isfinite(*sigma)) throw ContractError("gaussian_similarity: sigma must be positive");
    out.sigma = *sigma;
  } else {
    out.sigma_from_median = true;
    double median = 0.0;
    if (!sq.empty()) {
      std::vector<double> dist(sq.size());
      std::transform(sq.begin(), sq.end(), dist.begin(), [](double d) { return std::sqrt(d); });
      const std::size_t mid = dist.size() / 2;
      std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
      median = dist[mid];
      if (dist.size() % 2 == 0) {
        median = 0.5 * (median + *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid)));
      }
    }
    if (median > 0.0) {
      out.sigma = median;
    } else {
      if (!sq.empty()) log::warn("median edge distance is 0; using sigma = 1");
      out.sigma = 1.0;
    }
  }
  out.values.resize(sq.size());
  const double denom = 2.0 * out.sigma * out.sigma;
  for (std::size_t p = 0; p < sq.size(); ++p) out.values[p] = std::exp(-sq[p] / denom);
  return out;
}

std::vector<std::size_t> SupervisionSignal::positive_rows() const {
  std::vector<std::size_t> rows;
  rows.reserve(kappa);
  for (std::size_t p = 0; p < positive.size(); ++p)
    if (positive[p]) rows.push_back(p);
  return rows;
}

SupervisionSignal build_supervision(std::span<const double> similarity, double mu) {
  if (!(mu >= 0.0 && mu <= 1.0)) throw ContractError("build_supervision: mu must lie in [0, 1]");
  SupervisionSignal s;
  s.positive.resize(similarity.size());
  for (std::size_t p = 0; p < similarity.size(); ++p) {
    s.positive[p] = similarity[p] >= mu ? 1 : 0;
    s.kappa += s.positive[p];
  }
  return s;
}

PreDropResult pre_drop(const Graph& g, const EdgeSimilarity& sim, double p_pre) {
  if (!(p_pre >= 0.0 && p_pre <= 1.0)) throw ContractError("pre_drop: p_pre must lie in [0, 1]");
  if (sim.values.size() != g.num_edges()) throw ShapeError("pre_drop: one similarity per edge expected");
  PreDropResult r;
  r.mask.rate = p_pre;
  r.mask.keep.resize(g.num_edges());
  for (std::size_t p = 0; p < g.num_edges(); ++p) {
    r.mask.keep[p] = sim.values[p] >= p_pre ? 1 : 0;
    (r.mask.keep[p] ? r.surviving : r.removed).push_back(p);
  }
  r.reduced = g.subgraph(r.mask.keep);
  return r;
}

}  // namespace adedgedrop
