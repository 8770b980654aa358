#include "adedgedrop/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "adedgedrop/error.hpp"
#include "adedgedrop/log.hpp"
#include "adedgedrop/random.hpp"
#include "adedgedrop/supervision.hpp"

namespace adedgedrop {
namespace {

std::string fmt6(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::uint64_t epoch_stream(int epoch, std::uint64_t offset) {
  return streams::kPerEpochBase * static_cast<std::uint64_t>(epoch + 1) + offset;
}

}  // namespace

void TrainConfig::validate() const {
  auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in01(mu)) throw ConfigError("mu must lie in [0, 1]");
  if (!in01(alpha)) throw ConfigError("alpha must lie in [0, 1]");
  if (adversarial && !(gamma > 0.0)) throw ConfigError("gamma must be positive");
  if (eta < 1) throw ConfigError("eta must be at least 1");
  if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be non-negative");
  if (!(lr >= 0.0)) throw ConfigError("lr must be non-negative");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (patience < 1) throw ConfigError("patience must be at least 1");
  if (hidden < 1) throw ConfigError("hidden must be at least 1");
  if (!in01(p_pre)) throw ConfigError("p_pre must lie in [0, 1]");
  if (sigma && !(*sigma > 0.0)) throw ConfigError("sigma must be positive");
  if (!in01(random_drop_rate)) throw ConfigError("random_drop_rate must lie in [0, 1]");
}

std::string to_json_line(const MetricsRecord& r, bool with_timing) {
  std::string s = "{\"epoch\":" + std::to_string(r.epoch);
  s += ",\"l_lg\":" + (r.l_lg ? fmt6(*r.l_lg) : std::string("null"));
  s += ",\"l_ce\":" + fmt6(r.l_ce);
  s += ",\"val_acc\":" + fmt6(r.val_acc);
  s += ",\"test_acc\":" + fmt6(r.test_acc);
  s += ",\"kept_edges\":" + std::to_string(r.kept_edges);
  if (with_timing) s += ",\"wall_ms\":" + fmt6(r.wall_ms);
  s += "}";
  return s;
}

MetricsSink::MetricsSink(const std::filesystem::path& file, bool with_timing)
    : out_(file, std::ios::binary | std::ios::trunc), with_timing_(with_timing) {
  if (!out_) throw IoError("cannot write " + file.string());
}

void MetricsSink::append(const MetricsRecord& r) {
  const std::string line = to_json_line(r, with_timing_) + "\n";
  std::lock_guard<std::mutex> lock(mutex_);
  out_ << line;
  out_.flush();
  if (!out_) throw IoError("metrics write failure");
}

void optimizer_step(std::span<Parameter* const> params, const TrainConfig& cfg) {
  if (cfg.optimizer == OptimizerKind::sgd) {
    sgd_step(params, cfg.lr);
  } else {
    AdamOptions opt;
    opt.lr = cfg.lr;
    adam_step(params, opt);
  }
}

TrainResult train(const Graph& g, const FeatureMatrix& x, const LabelSplit& labels,
                  const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  labels.validate();
  if (x.rows() != g.num_nodes()) throw ShapeError("train: feature rows != num_nodes");
  if (labels.labels.size() != g.num_nodes()) throw ShapeError("train: label count != num_nodes");
  if (labels.train.empty()) throw ContractError("train: empty training set");
  const std::size_t c = labels.num_classes;
  const int eta = cfg.effective_eta();
  const double epsilon = cfg.effective_epsilon();

  TrainResult result;
  TrainDiagnostics& diag = result.diagnostics;

  const EdgeSimilarity sim = gaussian_similarity(x, g.edges(), cfg.sigma);
  diag.sigma = sim.sigma;

  // Line-graph nodes index `lg_source` edges; lg_to_full maps them back to g.
  Graph lg_source = g;
  std::vector<EdgeId> lg_to_full(g.num_edges());
  std::iota(lg_to_full.begin(), lg_to_full.end(), EdgeId{0});
  std::vector<EdgeId> outside_lg;
  std::vector<double> lg_sim = sim.values;
  if (cfg.p_pre > 0.0) {
    PreDropResult pd = pre_drop(g, sim, cfg.p_pre);
    lg_source = std::move(pd.reduced);
    lg_to_full = std::move(pd.surviving);
    outside_lg = std::move(pd.removed);
    lg_sim.clear();
    for (EdgeId e : lg_to_full) lg_sim.push_back(sim.values[e]);
    diag.pre_dropped = outside_lg.size();
  }
  const LineGraph lg = build_line_graph(lg_source);
  const SparseMatrix a_lg_prop = normalize_adjacency(lg.adjacency());
  const SupervisionSignal supervision = build_supervision(lg_sim, cfg.mu);
  diag.kappa = supervision.kappa;
  diag.line_graph_nodes = lg.num_nodes();
  diag.line_graph_edges = lg.num_edges();
  if (supervision.degenerate()) {
    log::warn("no edge reaches similarity mu; predictor and perturbation updates are skipped");
  }

  TrainState& st = result.state;
  st.theta = init_gcn(x.cols(), cfg.hidden, c, cfg.seed, streams::kThetaInit, "theta");
  st.omega = init_edge_predictor(c, cfg.hidden, cfg.seed);
  InitFeaturesReport feat_report;
  st.x_lg = init_features(lg_source, x, c, cfg.seed, &feat_report);
  diag.used_random_projection = feat_report.used_random_projection;

  const SparseMatrix full_prop = normalize_adjacency(g.adjacency());
  auto omega_params = st.omega.list();
  auto theta_params = st.theta.list();

  auto full_mask_from = [&](const EdgeMask& lg_mask, const std::vector<std::uint8_t>& outside_keep) {
    EdgeMask m;
    m.keep.assign(g.num_edges(), 0);
    for (std::size_t p = 0; p < lg_mask.keep.size(); ++p) m.keep[lg_to_full[p]] = lg_mask.keep[p];
    for (std::size_t k = 0; k < outside_lg.size(); ++k) m.keep[outside_lg[k]] = outside_keep[k];
    m.keep_count = static_cast<std::size_t>(std::count(m.keep.begin(), m.keep.end(), std::uint8_t{1}));
    return m;
  };

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    st.epoch = epoch;
    st.delta = init_perturbation(lg.num_nodes(), epsilon, cfg.seed,
                                 epoch_stream(epoch, streams::kPerturbation));

    std::vector<std::uint8_t> outside_keep(outside_lg.size(), 1);
    if (!outside_lg.empty() && cfg.random_drop_rate > 0.0) {
      Rng rng = make_rng(cfg.seed, epoch_stream(epoch, streams::kRandomDrop));
      std::bernoulli_distribution keep(1.0 - cfg.random_drop_rate);
      for (auto& k : outside_keep) k = keep(rng) ? 1 : 0;
    }

    double lg_loss_sum = 0.0;
    if (!supervision.degenerate()) {
      for (int step = 1; step <= eta; ++step) {
        Tape tape;
        EdgePrediction pred = predict_edges(tape, st.omega, st.x_lg, a_lg_prop, st.delta);
        Var loss = line_graph_loss(tape, pred.logits, supervision, cfg.lg_loss);
        lg_loss_sum += tape.value(loss)(0, 0);
        tape.backward(loss);
        if (cfg.adversarial) {
          st.delta = pgd_step(st.delta, tape.grad(pred.delta), cfg.gamma);
          if (hooks.on_pgd_step) hooks.on_pgd_step(epoch, step, st.delta);
        }
      }
    }

    // Mask from the perturbation left by the last PGD step.
    EdgeMask final_mask;
    {
      Tape tape;
      EdgePrediction pred = predict_edges(tape, st.omega, st.x_lg, a_lg_prop, st.delta);
      final_mask = full_mask_from(compute_mask(pred.keep_prob, cfg.mu), outside_keep);
      if (hooks.on_keep_prob) hooks.on_keep_prob(epoch, pred.keep_prob);
    }
    const CorruptedAdjacency corrupted = corrupt_adjacency(g, final_mask, epoch, eta);
    const SparseMatrix train_prop = normalize_adjacency(corrupted.graph.adjacency());

    if (!supervision.degenerate()) {
      scale_grads(omega_params, 1.0 / static_cast<double>(eta));
      optimizer_step(omega_params, cfg);
    }

    MetricsRecord rec;
    rec.epoch = epoch;
    if (!supervision.degenerate()) rec.l_lg = lg_loss_sum / static_cast<double>(eta);
    Matrix z;
    {
      Tape tape;
      Var logits = gcn_forward(tape, st.theta, tape.constant(x), train_prop);
      Var loss = classification_loss(tape, logits, labels);
      rec.l_ce = tape.value(loss)(0, 0);
      z = row_softmax(tape.value(logits));
      tape.backward(loss);
      optimizer_step(theta_params, cfg);
    }
    st.x_lg = update_features(st.x_lg, lg.edges(), z, cfg.alpha);

    const Matrix eval_logits = gcn_infer(st.theta, x, full_prop);
    rec.val_acc = labels.val.empty() ? 0.0 : accuracy(eval_logits, labels, SplitKind::val);
    rec.test_acc = labels.test.empty() ? 0.0 : accuracy(eval_logits, labels, SplitKind::test);
    rec.kept_edges = final_mask.keep_count;
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    if (rec.val_acc >= st.best_val_acc) {
      st.has_checkpoint = true;
      st.best_epoch = epoch;
      st.best_val_acc = rec.val_acc;
      st.best_test_acc = rec.test_acc;
      st.best_mask = final_mask;
      st.best_theta = st.theta;
      st.best_omega = st.omega;
    }
    result.metrics.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);
    if (epoch - st.best_epoch >= cfg.patience) break;
  }
  return result;
}

std::pair<double, double> evaluate(const TrainState& state, const Graph& g, const FeatureMatrix& x,
                                   const LabelSplit& labels) {
  const GcnParams& params = state.has_checkpoint ? state.best_theta : state.theta;
  const Matrix logits = gcn_infer(params, x, normalize_adjacency(g.adjacency()));
  return {accuracy(logits, labels, SplitKind::val), accuracy(logits, labels, SplitKind::test)};
}

ExportSummary export_learned_graph(const TrainState& state, const Graph& g,
                                   const std::filesystem::path& out) {
  if (!state.has_checkpoint || state.best_mask.keep.size() != g.num_edges()) {
    throw ContractError("export_learned_graph: no checkpointed mask for this graph");
  }
  const Graph learned = g.subgraph(state.best_mask.keep);
  write_edges(out, learned.edges());
  ExportSummary s;
  s.total_edges = g.num_edges();
  s.kept_edges = learned.num_edges();
  s.deleted_pct = s.total_edges == 0
                      ? 0.0
                      : 100.0 * static_cast<double>(s.total_edges - s.kept_edges) /
                            static_cast<double>(s.total_edges);
  return s;
}

}  // namespace adedgedrop
