#include <cmath>

#include "../support/gradient_checks.hpp"
#include "adedgedrop/adversary.hpp"
#include "adedgedrop/error.hpp"
#include "doctest.h"

using namespace adedgedrop;
using adedgedrop::testing::random_matrix;

namespace {

struct LgFixture {
  adedgedrop::testing::SmallProblem pb{4};
  LineGraph lg = build_line_graph(pb.graph);
  SparseMatrix prop = normalize_adjacency(lg.adjacency());
  LineGraphFeatures x_lg = init_features(pb.graph, pb.x, 2, 4);
  EdgePredictorParams omega = init_edge_predictor(2, 16, 4);
};

}  // namespace

TEST_CASE("init_edge_predictor: 2c inputs, two outputs") {
  const EdgePredictorParams p = init_edge_predictor(3, 16, 1);
  CHECK(p.in_dim() == 6);
  CHECK(p.out_dim() == 2);
}

TEST_CASE("predict_edges: zero delta is the plain network output") {
  LgFixture f;
  const Perturbation zero = init_perturbation(f.lg.num_nodes(), 0.0, 1, 1);
  Tape t;
  const EdgePrediction pr = predict_edges(t, f.omega, f.x_lg, f.prop, zero);
  CHECK(t.value(pr.logits) == gcn_infer(f.omega, f.x_lg.values, f.prop));
  CHECK(t.value(pr.logits).rows() == f.lg.num_nodes());
  CHECK(t.value(pr.logits).cols() == 2);
  CHECK(t.requires_grad(pr.delta));
}

TEST_CASE("predict_edges: pushing delta toward keep raises every keep probability") {
  LgFixture f;
  const double eps = 0.1;
  Perturbation zero = init_perturbation(f.lg.num_nodes(), 0.0, 1, 1);
  Perturbation push = zero;
  push.epsilon = eps;
  for (std::size_t p = 0; p < f.lg.num_nodes(); ++p) {
    push.delta(p, kKeepColumn) = eps;
    push.delta(p, 1 - kKeepColumn) = -eps;
  }
  Tape t;
  const EdgePrediction a = predict_edges(t, f.omega, f.x_lg, f.prop, zero);
  const EdgePrediction b = predict_edges(t, f.omega, f.x_lg, f.prop, push);
  for (std::size_t p = 0; p < a.keep_prob.size(); ++p) CHECK(b.keep_prob[p] > a.keep_prob[p]);
  CHECK_THROWS_AS(predict_edges(t, f.omega, f.x_lg, f.prop, init_perturbation(3, 0.1, 1, 1)), ShapeError);
}

TEST_CASE("compute_mask: threshold inclusive, empty, monotone in mu") {
  const std::vector<double> kp{0.7, 0.6, 0.2};
  const EdgeMask m = compute_mask(kp, 0.6);
  CHECK(m.keep == std::vector<std::uint8_t>{1, 1, 0});
  CHECK(m.keep_count == 2);
  CHECK(compute_mask(kp, 0.8).keep_count == 0);
  CHECK(compute_mask(kp, 0.0).keep_count == 3);
  std::vector<double> many;
  for (int i = 0; i < 40; ++i) many.push_back(std::fmod(i * 0.377, 1.0));
  for (int k = 0; k < 10; ++k) {
    const EdgeMask lo = compute_mask(many, k / 10.0), hi = compute_mask(many, (k + 1) / 10.0);
    for (std::size_t p = 0; p < many.size(); ++p)
      if (hi.keep[p]) CHECK(lo.keep[p]);
  }
}

TEST_CASE("corrupt_adjacency: identity, full corruption, triangle") {
  const std::vector<Edge> k3{{0, 1}, {1, 2}, {0, 2}};
  const Graph g = Graph::from_edges(3, k3);
  EdgeMask all{{1, 1, 1}, 3};
  CHECK(corrupt_adjacency(g, all).graph == g);

  EdgeMask none{{0, 0, 0}, 0};
  const CorruptedAdjacency c0 = corrupt_adjacency(g, none, 4, 2);
  CHECK(c0.graph.num_edges() == 0);
  CHECK(c0.epoch == 4);
  CHECK(c0.step == 2);
  CHECK(normalize_adjacency(c0.graph.adjacency()) == SparseMatrix::identity(3));

  EdgeMask one_off{{1, 0, 1}, 2};  // edges sort as (0,1), (0,2), (1,2)
  const Graph tri = corrupt_adjacency(g, one_off).graph;
  CHECK(std::vector<std::size_t>(tri.degrees().begin(), tri.degrees().end()) == std::vector<std::size_t>{1, 2, 1});
}

TEST_CASE("corrupt_adjacency: support never grows") {
  const Graph g = adedgedrop::testing::erdos_renyi(20, 0.3, 6);
  Rng rng = make_rng(1, 1);
  for (int trial = 0; trial < 20; ++trial) {
    EdgeMask m;
    for (std::size_t p = 0; p < g.num_edges(); ++p) {
      m.keep.push_back(static_cast<std::uint8_t>(rng() & 1u));
      m.keep_count += m.keep.back();
    }
    const Graph c = corrupt_adjacency(g, m).graph;
    CHECK(c.num_edges() == m.keep_count);
    for (const Edge& e : c.edges()) CHECK(g.has_edge(e.u, e.v));
    CHECK(c.adjacency() == c.adjacency().transpose());
  }
}

TEST_CASE("line_graph_loss: perfect, uniform, hand-set, degenerate") {
  SupervisionSignal s{{1, 1}, 2};
  Tape t;
  CHECK(t.value(line_graph_loss(t, t.constant(Matrix{{900.0, 0.0}, {900.0, 0.0}}), s))(0, 0) ==
        doctest::Approx(0.0));
  CHECK(t.value(line_graph_loss(t, t.constant(Matrix(2, 2, 0.0)), s))(0, 0) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-14));
  // keep probabilities 0.5 and 0.25
  const Matrix z{{0.0, 0.0}, {0.0, std::log(3.0)}};
  CHECK(t.value(line_graph_loss(t, t.constant(z), s))(0, 0) ==
        doctest::Approx((std::log(2.0) + std::log(4.0)) / 2).epsilon(1e-14));

  SupervisionSignal mixed{{1, 0}, 1};
  CHECK(t.value(line_graph_loss(t, t.constant(z), mixed))(0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  // two-sided adds -ln(drop prob) of the negative, drop prob 0.75
  CHECK(t.value(line_graph_loss(t, t.constant(z), mixed, LineGraphLossKind::two_sided))(0, 0) ==
        doctest::Approx(std::log(2.0) - std::log(0.75)).epsilon(1e-14));

  SupervisionSignal none{{0, 0}, 0};
  CHECK_THROWS_AS(line_graph_loss(t, t.constant(z), none), ContractError);
}

TEST_CASE("line_graph_loss: decreases when positive keep probabilities rise") {
  SupervisionSignal s{{1, 0, 1}, 2};
  Matrix z = random_matrix(3, 2, 3);
  double prev = 0.0;
  for (int k = 0; k < 5; ++k) {
    Tape t;
    const double v = t.value(line_graph_loss(t, t.constant(z), s))(0, 0);
    if (k > 0) CHECK(v < prev);
    prev = v;
    z(0, kKeepColumn) += 0.3;
    z(2, kKeepColumn) += 0.3;
  }
}

TEST_CASE("f_omega + line_graph_loss: finite differences for weights and delta") {
  for (auto kind : {LineGraphLossKind::positive_only, LineGraphLossKind::two_sided})
    for (std::uint64_t seed : {1u, 2u, 3u})
      for (const auto& r : adedgedrop::testing::check_predictor_gradients(seed, kind)) {
        INFO(r.name << " seed " << seed << " max_rel " << r.result.max_rel);
        CHECK(r.result.ok);
      }
}

TEST_CASE("pgd_step: clip at the boundary, sign(0) = 0") {
  Perturbation d{Matrix{{0.08, -0.02, 0.05}}, 0.1};
  const Perturbation n = pgd_step(d, Matrix{{1.0, -3.0, 0.0}}, 0.05);
  CHECK(n.delta(0, 0) == 0.1);
  CHECK(n.delta(0, 1) == doctest::Approx(-0.07).epsilon(1e-15));
  CHECK(n.delta(0, 2) == 0.05);
  CHECK(n.epsilon == 0.1);
}

TEST_CASE("pgd_step: ascent on delta'delta/2 from a nonzero start") {
  Perturbation d{Matrix{{0.01, -0.02}, {0.03, 0.0}}, 0.1};
  auto obj = [](const Matrix& m) {
    double s = 0.0;
    for (double v : m.data()) s += v * v / 2;
    return s;
  };
  for (int k = 0; k < 5; ++k) {
    const Perturbation n = pgd_step(d, d.delta, 0.02);
    CHECK(obj(n.delta) >= obj(d.delta));
    if (d.delta.max_abs() < d.epsilon) CHECK(obj(n.delta) > obj(d.delta));
    CHECK(n.delta.max_abs() <= n.epsilon);
    d = n;
  }
}

TEST_CASE("init_perturbation: support, zero radius, determinism") {
  const Perturbation a = init_perturbation(50, 0.05, 3, 7);
  CHECK(a.delta.rows() == 50);
  CHECK(a.delta.cols() == 2);
  CHECK(a.delta.max_abs() <= 0.05);
  CHECK(init_perturbation(50, 0.05, 3, 7).delta == a.delta);
  CHECK(init_perturbation(50, 0.0, 3, 7).delta == Matrix(50, 2, 0.0));
  CHECK_THROWS_AS(init_perturbation(5, -1.0, 3, 7), ContractError);
}
