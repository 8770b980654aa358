#include <cmath>

#include "../support/random_graph.hpp"
#include "adedgedrop/error.hpp"
#include "adedgedrop/log.hpp"
#include "adedgedrop/supervision.hpp"
#include "doctest.h"

using namespace adedgedrop;

TEST_CASE("gaussian_similarity: zero distance and the e^-1 point") {
  const Matrix x{{0.0, 0.0}, {0.0, 0.0}, {1.0, 1.0}};
  const std::vector<Edge> edges{{0, 1}, {0, 2}};
  const EdgeSimilarity s = gaussian_similarity(x, edges, 1.0);
  CHECK(s.values[0] == 1.0);
  // |x0 - x2|^2 = 2 = 2 sigma^2
  CHECK(s.values[1] == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK_FALSE(s.sigma_from_median);
  CHECK_THROWS_AS(gaussian_similarity(x, edges, 0.0), ContractError);
  CHECK_THROWS_AS(gaussian_similarity(x, edges, -1.0), ContractError);
}

TEST_CASE("gaussian_similarity: monotone decay with distance") {
  Matrix x(6, 1);
  for (std::size_t i = 0; i < 6; ++i) x(i, 0) = static_cast<double>(i * i);
  const std::vector<Edge> edges{{0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 5}};
  const EdgeSimilarity s = gaussian_similarity(x, edges, 2.0);
  for (std::size_t p = 1; p < s.values.size(); ++p) CHECK(s.values[p] < s.values[p - 1]);
  CHECK(s.values.back() > 0.0);
}

TEST_CASE("gaussian_similarity: median bandwidth") {
  Matrix x(5, 1);
  for (std::size_t i = 0; i < 5; ++i) x(i, 0) = static_cast<double>(i);
  // distances 1, 2, 3, 4 -> median 2.5
  const std::vector<Edge> edges{{0, 1}, {0, 2}, {0, 3}, {0, 4}};
  const EdgeSimilarity s = gaussian_similarity(x, edges);
  CHECK(s.sigma_from_median);
  CHECK(s.sigma == doctest::Approx(2.5));
  CHECK(s.values[1] == doctest::Approx(std::exp(-4.0 / (2 * 6.25))));
}

TEST_CASE("gaussian_similarity: identical features fall back to sigma 1") {
  log::set_quiet(true);
  const Matrix x(3, 2, 0.5);
  const std::vector<Edge> edges{{0, 1}, {1, 2}};
  const EdgeSimilarity s = gaussian_similarity(x, edges);
  log::set_quiet(false);
  CHECK(s.sigma == 1.0);
  CHECK(s.values == std::vector<double>{1.0, 1.0});
}

TEST_CASE("gaussian_similarity: permutation equivariance") {
  const Graph g = adedgedrop::testing::erdos_renyi(15, 0.3, 1);
  const Matrix x = adedgedrop::testing::random_matrix(15, 4, 2);
  std::vector<std::size_t> perm(15);
  for (std::size_t i = 0; i < 15; ++i) perm[i] = (i * 7 + 3) % 15;
  Matrix px(15, 4);
  for (std::size_t i = 0; i < 15; ++i)
    for (std::size_t j = 0; j < 4; ++j) px(perm[i], j) = x(i, j);
  std::vector<Edge> pe;
  for (const Edge& e : g.edges()) pe.push_back({perm[e.u], perm[e.v]});
  const EdgeSimilarity a = gaussian_similarity(x, g.edges(), 1.3);
  const EdgeSimilarity b = gaussian_similarity(px, pe, 1.3);
  CHECK(a.values == b.values);
}

TEST_CASE("build_supervision: boundary, degenerate and monotone") {
  const std::vector<double> sim{0.7, 0.6, 0.2};
  const SupervisionSignal s = build_supervision(sim, 0.6);
  CHECK(s.positive == std::vector<std::uint8_t>{1, 1, 0});
  CHECK(s.kappa == 2);
  CHECK(s.positive_rows() == std::vector<std::size_t>{0, 1});
  const SupervisionSignal none = build_supervision(sim, 0.9);
  CHECK(none.kappa == 0);
  CHECK(none.degenerate());

  const auto values = [] {
    std::vector<double> v;
    for (int i = 0; i < 50; ++i) v.push_back(std::fmod(i * 0.137, 1.0));
    return v;
  }();
  for (int k = 0; k < 10; ++k) {
    const auto a = build_supervision(values, k / 10.0);
    const auto b = build_supervision(values, (k + 1) / 10.0);
    for (std::size_t p = 0; p < values.size(); ++p)
      if (b.positive[p]) CHECK(a.positive[p]);
  }
}

TEST_CASE("pre_drop: endpoints and a mixed case") {
  const std::vector<Edge> edges{{0, 1}, {1, 2}, {2, 3}};
  const Graph g = Graph::from_edges(4, edges);
  EdgeSimilarity sim;
  sim.values = {0.2, 0.6, 0.9};

  const PreDropResult all = pre_drop(g, sim, 0.0);
  CHECK(all.reduced == g);
  CHECK(all.removed.empty());

  const PreDropResult none = pre_drop(g, sim, 0.95);
  CHECK(none.reduced.num_edges() == 0);

  const PreDropResult mixed = pre_drop(g, sim, 0.5);
  CHECK(mixed.reduced.num_edges() == 2);
  CHECK(mixed.mask.keep == std::vector<std::uint8_t>{0, 1, 1});
  CHECK(mixed.surviving == std::vector<EdgeId>{1, 2});
  CHECK(mixed.removed == std::vector<EdgeId>{0});
  CHECK(mixed.reduced.adjacency() == mixed.reduced.adjacency().transpose());

  const PreDropResult boundary = pre_drop(g, sim, 0.6);
  CHECK(boundary.mask.keep == std::vector<std::uint8_t>{0, 1, 1});
}
