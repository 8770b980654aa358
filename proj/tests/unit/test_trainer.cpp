#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>

#include "adedgedrop/error.hpp"
#include "adedgedrop/harness.hpp"
#include "adedgedrop/log.hpp"
#include "adedgedrop/trainer.hpp"
#include "doctest.h"
#include "json.hpp"
#include "tmpdir.hpp"

using namespace adedgedrop;
using adedgedrop::testing::TempDir;

namespace {

SbmDataset small_sbm(std::uint64_t seed = 0) {
  SbmSpec spec;
  spec.block_sizes = {30, 30};
  spec.p_intra = 0.2;
  spec.p_inter = 0.02;
  spec.noise_edges = 15;
  spec.feature_dim = 8;
  spec.train_per_class = 5;
  spec.seed = seed;
  return gen_sbm(spec);
}

TrainConfig quick_config() {
  TrainConfig cfg;
  cfg.epochs = 25;
  cfg.patience = 25;
  cfg.mu = 0.6;
  return cfg;
}

}  // namespace

TEST_CASE("TrainConfig::validate") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  auto bad = [](auto mutate) {
    TrainConfig t;
    mutate(t);
    return t;
  };
  CHECK_THROWS_AS(bad([](TrainConfig& t) { t.mu = 1.1; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](TrainConfig& t) { t.alpha = -0.1; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](TrainConfig& t) { t.eta = 0; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](TrainConfig& t) { t.epsilon = -1; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](TrainConfig& t) { t.gamma = 0; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](TrainConfig& t) { t.sigma = 0.0; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](TrainConfig& t) { t.p_pre = 2; }).validate(), ConfigError);
  TrainConfig off;
  off.adversarial = false;
  off.gamma = 0;
  CHECK_NOTHROW(off.validate());
  CHECK(off.effective_eta() == 1);
  CHECK(off.effective_epsilon() == 0.0);
}

TEST_CASE("to_json_line: keys, six significant digits, null loss, optional timing") {
  MetricsRecord r;
  r.epoch = 3;
  r.l_lg = 0.123456789;
  r.l_ce = 2.0 / 3.0;
  r.val_acc = 0.5;
  r.test_acc = 1.0;
  r.kept_edges = 12;
  r.wall_ms = 4.25;
  CHECK(to_json_line(r) ==
        R"({"epoch":3,"l_lg":0.123457,"l_ce":0.666667,"val_acc":0.5,"test_acc":1,"kept_edges":12})");
  r.l_lg.reset();
  const auto j = nlohmann::json::parse(to_json_line(r, true));
  CHECK(j["l_lg"].is_null());
  CHECK(j["wall_ms"].get<double>() == 4.25);
}

TEST_CASE("MetricsSink: concurrent appends stay line-atomic") {
  TempDir dir("sink");
  {
    MetricsSink sink(dir / "m.jsonl");
    std::vector<std::thread> ts;
    for (int t = 0; t < 4; ++t)
      ts.emplace_back([&sink, t] {
        for (int e = 0; e < 200; ++e) {
          MetricsRecord r;
          r.epoch = t * 1000 + e;
          r.l_ce = 1.0 / (e + 1);
          sink.append(r);
        }
      });
    for (auto& t : ts) t.join();
  }
  std::ifstream in(dir / "m.jsonl");
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    CHECK(nlohmann::json::parse(line).is_object());
    ++n;
  }
  CHECK(n == 800);
}

TEST_CASE("train: deterministic per seed") {
  const SbmDataset d = small_sbm();
  const TrainConfig cfg = quick_config();
  const TrainResult a = train(d.data.graph, d.data.features, d.data.labels, cfg);
  const TrainResult b = train(d.data.graph, d.data.features, d.data.labels, cfg);
  REQUIRE(a.metrics.size() == b.metrics.size());
  for (std::size_t i = 0; i < a.metrics.size(); ++i) CHECK(to_json_line(a.metrics[i]) == to_json_line(b.metrics[i]));
  CHECK(a.state.best_mask.keep == b.state.best_mask.keep);
}

TEST_CASE("train: records, checkpoint is the best validation epoch") {
  const SbmDataset d = small_sbm(1);
  const TrainResult r = train(d.data.graph, d.data.features, d.data.labels, quick_config());
  REQUIRE_FALSE(r.metrics.empty());
  double best = -1.0;
  for (const MetricsRecord& m : r.metrics) {
    CHECK(m.kept_edges <= d.data.graph.num_edges());
    CHECK(std::isfinite(m.l_ce));
    best = std::max(best, m.val_acc);
  }
  CHECK(r.state.has_checkpoint);
  CHECK(r.state.best_val_acc == best);
  const MetricsRecord& at = r.metrics[static_cast<std::size_t>(r.state.best_epoch - 1)];
  CHECK(at.val_acc == best);
  CHECK(at.test_acc == r.state.best_test_acc);
  CHECK(at.kept_edges == r.state.best_mask.keep_count);
  CHECK(r.diagnostics.line_graph_nodes == d.data.graph.num_edges());
}

TEST_CASE("train: every post-step perturbation stays in the ball") {
  const SbmDataset d = small_sbm(2);
  TrainConfig cfg = quick_config();
  cfg.epsilon = 0.07;
  cfg.gamma = 0.05;
  std::size_t steps = 0;
  bool inside = true;
  TrainHooks h;
  h.on_pgd_step = [&](int, int, const Perturbation& p) {
    ++steps;
    inside = inside && p.delta.max_abs() <= cfg.epsilon;
  };
  const TrainResult r = train(d.data.graph, d.data.features, d.data.labels, cfg, h);
  CHECK(steps == r.metrics.size() * static_cast<std::size_t>(cfg.eta));
  CHECK(inside);
}

TEST_CASE("train: adversarial off means no PGD and a single inner step") {
  const SbmDataset d = small_sbm(3);
  TrainConfig cfg = quick_config();
  cfg.adversarial = false;
  cfg.gamma = 0.0;
  std::size_t steps = 0;
  TrainHooks h;
  h.on_pgd_step = [&](int, int, const Perturbation&) { ++steps; };
  const TrainResult r = train(d.data.graph, d.data.features, d.data.labels, cfg, h);
  CHECK(steps == 0);
  CHECK(r.state.delta.delta.max_abs() == 0.0);
}

TEST_CASE("train: mu = 0 keeps every edge and matches the plain GCN") {
  const SbmDataset d = small_sbm(4);
  TrainConfig cfg = quick_config();
  cfg.mu = 0.0;
  const TrainResult r = train(d.data.graph, d.data.features, d.data.labels, cfg);
  const BaselineResult plain = run_baseline(BaselineKind::plain, d.data, cfg, 0.0);
  REQUIRE(r.metrics.size() == plain.metrics.size());
  for (std::size_t i = 0; i < r.metrics.size(); ++i) {
    CHECK(r.metrics[i].kept_edges == d.data.graph.num_edges());
    CHECK(r.metrics[i].l_ce == plain.metrics[i].l_ce);
    CHECK(r.metrics[i].val_acc == plain.metrics[i].val_acc);
    CHECK(r.metrics[i].test_acc == plain.metrics[i].test_acc);
  }
}

TEST_CASE("train: no positive edge skips the predictor but still trains the backbone") {
  log::set_quiet(true);
  const SbmDataset d = small_sbm(5);
  TrainConfig cfg = quick_config();
  cfg.mu = 1.0;
  std::size_t steps = 0;
  TrainHooks h;
  h.on_pgd_step = [&](int, int, const Perturbation&) { ++steps; };
  const TrainResult r = train(d.data.graph, d.data.features, d.data.labels, cfg, h);
  log::set_quiet(false);
  CHECK(r.diagnostics.kappa == 0);
  CHECK(steps == 0);
  for (const auto& m : r.metrics) CHECK_FALSE(m.l_lg.has_value());
  CHECK(r.metrics.back().l_ce < r.metrics.front().l_ce);
}

TEST_CASE("train: pre-dropping builds the line graph on survivors") {
  const SbmDataset d = small_sbm(6);
  TrainConfig cfg = quick_config();
  cfg.p_pre = 0.5;
  cfg.random_drop_rate = 0.3;
  const TrainResult r = train(d.data.graph, d.data.features, d.data.labels, cfg);
  CHECK(r.diagnostics.pre_dropped > 0);
  CHECK(r.diagnostics.line_graph_nodes + r.diagnostics.pre_dropped == d.data.graph.num_edges());
  CHECK(r.state.best_mask.keep.size() == d.data.graph.num_edges());
  CHECK(r.state.delta.delta.rows() == r.diagnostics.line_graph_nodes);
}

TEST_CASE("train: early stopping honours patience") {
  const SbmDataset d = small_sbm(7);
  TrainConfig cfg = quick_config();
  cfg.epochs = 300;
  cfg.patience = 5;
  const TrainResult r = train(d.data.graph, d.data.features, d.data.labels, cfg);
  CHECK(static_cast<int>(r.metrics.size()) <= r.state.best_epoch + cfg.patience);
  CHECK(static_cast<int>(r.metrics.size()) < cfg.epochs);
}

TEST_CASE("evaluate: reproduces the checkpoint and ignores the mask") {
  const SbmDataset d = small_sbm(8);
  TrainResult r = train(d.data.graph, d.data.features, d.data.labels, quick_config());
  const auto [val, test] = evaluate(r.state, d.data.graph, d.data.features, d.data.labels);
  CHECK(val == r.state.best_val_acc);
  CHECK(test == r.state.best_test_acc);
  std::fill(r.state.best_mask.keep.begin(), r.state.best_mask.keep.end(), 0);
  r.state.best_mask.keep_count = 0;
  const auto again = evaluate(r.state, d.data.graph, d.data.features, d.data.labels);
  CHECK(again.first == val);
  CHECK(again.second == test);
}

TEST_CASE("evaluate: zero weights predict the lowest class") {
  const SbmDataset d = small_sbm(9);
  TrainState st;
  st.theta = init_gcn(d.data.features.cols(), 4, 2, 0, 1, "theta");
  st.theta.w1.value.fill(0.0);
  st.theta.w2.value.fill(0.0);
  const auto [val, test] = evaluate(st, d.data.graph, d.data.features, d.data.labels);
  auto freq = [&](const std::vector<NodeId>& nodes) {
    double zeros = 0;
    for (NodeId v : nodes) zeros += d.data.labels.labels[v] == 0;
    return zeros / static_cast<double>(nodes.size());
  };
  CHECK(val == doctest::Approx(freq(d.data.labels.val)));
  CHECK(test == doctest::Approx(freq(d.data.labels.test)));
}

TEST_CASE("export_learned_graph: full mask, counts, deleted percentage") {
  TempDir dir("export");
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < 100; ++i) edges.push_back({i, i + 1});
  const Graph g = Graph::from_edges(101, edges);
  TrainState st;
  st.has_checkpoint = true;
  st.best_mask.keep.assign(100, 1);
  st.best_mask.keep_count = 100;
  const ExportSummary all = export_learned_graph(st, g, dir / "all.tsv");
  write_edges(dir / "canon.tsv", g.edges());
  CHECK(adedgedrop::testing::slurp(dir / "all.tsv") == adedgedrop::testing::slurp(dir / "canon.tsv"));
  CHECK(all.deleted_pct == 0.0);

  std::fill(st.best_mask.keep.begin() + 25, st.best_mask.keep.end(), 0);
  st.best_mask.keep_count = 25;
  const ExportSummary part = export_learned_graph(st, g, dir / "part.tsv");
  CHECK(part.kept_edges == 25);
  CHECK(part.deleted_pct == 75.0);
  const std::string text = adedgedrop::testing::slurp(dir / "part.tsv");
  CHECK(std::count(text.begin(), text.end(), '\n') == 25);

  TrainState empty;
  CHECK_THROWS_AS(export_learned_graph(empty, g, dir / "x.tsv"), ContractError);
}

TEST_CASE("predictor update with eta identical gradients equals one step") {
  auto run = [](int eta) {
    Parameter p("p", Matrix{{0.3, -0.7}});
    for (int k = 0; k < eta; ++k) {
      p.grad(0, 0) += 0.2;
      p.grad(0, 1) += -0.5;
    }
    p.has_grad = true;
    Parameter* ps[] = {&p};
    scale_grads(ps, 1.0 / eta);
    adam_step(ps, AdamOptions{});
    return p.value;
  };
  const Matrix one = run(1), five = run(5);
  CHECK(one(0, 0) == doctest::Approx(five(0, 0)).epsilon(1e-15));
  CHECK(one(0, 1) == doctest::Approx(five(0, 1)).epsilon(1e-15));
}

TEST_CASE("losses on a shared tape leave the other network's grads untouched") {
  const SbmDataset d = small_sbm(10);
  GcnParams theta = init_gcn(d.data.features.cols(), 8, 2, 1, 1, "theta");
  EdgePredictorParams omega = init_edge_predictor(2, 8, 1);
  const SparseMatrix prop = normalize_adjacency(d.data.graph.adjacency());
  const LineGraph lg = build_line_graph(d.data.graph);
  const SparseMatrix lg_prop = normalize_adjacency(lg.adjacency());
  const LineGraphFeatures x_lg = init_features(d.data.graph, d.data.features, 2, 1);
  SupervisionSignal s;
  s.positive.assign(lg.num_nodes(), 0);
  s.positive[0] = 1;
  s.kappa = 1;
  const Perturbation delta = init_perturbation(lg.num_nodes(), 0.05, 1, 1);

  Tape t;
  const Var ce = classification_loss(t, gcn_forward(t, theta, t.constant(d.data.features), prop), d.data.labels);
  const Var lgl = line_graph_loss(t, predict_edges(t, omega, x_lg, lg_prop, delta).logits, s);
  t.backward(ce);
  CHECK(theta.w1.has_grad);
  CHECK_FALSE(omega.w1.has_grad);
  const Matrix theta_grad = theta.w1.grad;
  for (Parameter* p : theta.list()) p->zero_grad();
  t.backward(lgl);
  CHECK(omega.w1.has_grad);
  CHECK_FALSE(theta.w1.has_grad);

  Tape solo;
  solo.backward(classification_loss(solo, gcn_forward(solo, theta, solo.constant(d.data.features), prop), d.data.labels));
  CHECK(theta.w1.grad == theta_grad);
}
