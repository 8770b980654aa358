#include "adedgedrop/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

#include "adedgedrop/error.hpp"
#include "adedgedrop/random.hpp"

namespace adedgedrop {
namespace {

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::size_t max_edges(std::size_t n) { return n * (n - (n > 0 ? 1 : 0)) / 2; }

}  // namespace

Dataset load_dataset(const std::filesystem::path& dir, LoadReport* report) {
  Dataset d;
  d.features = load_features(dir / "features.tsv");
  const std::size_t n = d.features.rows();
  d.graph = load_graph(dir / "edges.tsv", n, report);
  d.labels = load_labels(dir / "labels.tsv", dir / "splits.tsv", n);
  return d;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& d) {
  std::filesystem::create_directories(dir);
  write_edges(dir / "edges.tsv", d.graph.edges());
  write_features(dir / "features.tsv", d.features);
  write_labels(dir / "labels.tsv", dir / "splits.tsv", d.labels);
}

void SbmSpec::validate() const {
  if (block_sizes.size() < 2) throw ConfigError("sbm needs at least 2 blocks");
  for (std::size_t b : block_sizes)
    if (b < 1) throw ConfigError("sbm block sizes must be >= 1");
  if (!(p_intra >= 0.0 && p_intra <= 1.0) || !(p_inter >= 0.0 && p_inter <= 1.0)) {
    throw ConfigError("sbm probabilities must lie in [0, 1]");
  }
  if (feature_dim < 1) throw ConfigError("sbm feature_dim must be >= 1");
}

LabelSplit make_split(std::vector<int> labels, std::size_t num_classes, std::size_t train_per_class,
                      std::uint64_t seed) {
  const std::size_t n = labels.size();
  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), NodeId{0});
  Rng rng = make_rng(seed, streams::kSplit);
  std::shuffle(order.begin(), order.end(), rng);

  LabelSplit s;
  s.labels = std::move(labels);
  s.num_classes = num_classes;
  std::vector<std::size_t> taken(num_classes, 0);
  std::vector<NodeId> rest;
  for (NodeId v : order) {
    const int y = s.labels[v];
    if (y >= 0 && taken[static_cast<std::size_t>(y)] < train_per_class) {
      ++taken[static_cast<std::size_t>(y)];
      s.train.push_back(v);
    } else if (y >= 0) {
      rest.push_back(v);
    }
  }
  const std::size_t n_val = std::min<std::size_t>({500, static_cast<std::size_t>(0.3 * static_cast<double>(n)), rest.size()});
  s.val.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_val));
  s.test.assign(rest.begin() + static_cast<std::ptrdiff_t>(n_val), rest.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

SbmDataset gen_sbm(const SbmSpec& spec) {
  spec.validate();
  const std::size_t k = spec.block_sizes.size();
  const std::size_t n = std::accumulate(spec.block_sizes.begin(), spec.block_sizes.end(), std::size_t{0});
  std::vector<int> block(n);
  for (std::size_t b = 0, v = 0; b < k; ++b)
    for (std::size_t i = 0; i < spec.block_sizes[b]; ++i) block[v++] = static_cast<int>(b);

  Rng rng = make_rng(spec.seed, streams::kSbm);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double p = block[i] == block[j] ? spec.p_intra : spec.p_inter;
      if (unit(rng) < p) edges.push_back(Edge{i, j});
    }
  const Graph base = Graph::from_edges(n, edges);

  std::size_t inter_pairs = 0;
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b) inter_pairs += spec.block_sizes[a] * spec.block_sizes[b];
  std::size_t inter_edges = 0;
  for (const Edge& e : base.edges()) inter_edges += block[e.u] != block[e.v];
  if (spec.noise_edges > inter_pairs - inter_edges) {
    throw ContractError("gen_sbm: " + std::to_string(spec.noise_edges) +
                        " noise edges requested but only " + std::to_string(inter_pairs - inter_edges) +
                        " inter-class non-edges exist");
  }
  std::set<Edge> noise;
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  if (spec.noise_edges * 2 <= inter_pairs - inter_edges) {
    while (noise.size() < spec.noise_edges) {
      std::size_t a = pick(rng), b = pick(rng);
      if (block[a] == block[b]) continue;
      Edge e{std::min(a, b), std::max(a, b)};
      if (base.has_edge(e.u, e.v)) continue;
      noise.insert(e);
    }
  } else {
    std::vector<Edge> pool;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (block[i] != block[j] && !base.has_edge(i, j)) pool.push_back(Edge{i, j});
    std::shuffle(pool.begin(), pool.end(), rng);
    noise.insert(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(spec.noise_edges));
  }
  edges.insert(edges.end(), noise.begin(), noise.end());

  SbmDataset out;
  out.noisy_edges.assign(noise.begin(), noise.end());
  out.data.graph = Graph::from_edges(n, edges);

  std::normal_distribution<double> nd(0.0, 1.0);
  out.data.features = FeatureMatrix(n, spec.feature_dim);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < spec.feature_dim; ++d) {
      const double mean = d % k == static_cast<std::size_t>(block[i]) ? spec.mean_separation : 0.0;
      out.data.features(i, d) = mean + nd(rng);
    }
  out.data.labels = make_split(block, k, spec.train_per_class, spec.seed);
  return out;
}

Graph attack_graph(const Graph& g, AttackKind kind, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ContractError("attack_graph: rate must lie in [0, 1]");
  const std::size_t count = static_cast<std::size_t>(std::floor(rate * static_cast<double>(g.num_edges())));
  if (kind == AttackKind::none || count == 0) return g;
  Rng rng = make_rng(seed, streams::kAttack);
  std::vector<Edge> edges(g.edges().begin(), g.edges().end());
  if (kind == AttackKind::remove) {
    std::shuffle(edges.begin(), edges.end(), rng);
    edges.resize(edges.size() - count);
    return Graph::from_edges(g.num_nodes(), edges);
  }
  const std::size_t n = g.num_nodes();
  const std::size_t available = max_edges(n) - g.num_edges();
  if (count > available) {
    throw ContractError("attack_graph: cannot add " + std::to_string(count) + " edges, only " +
                        std::to_string(available) + " non-edges exist");
  }
  std::set<Edge> added;
  if (count * 2 <= available) {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    while (added.size() < count) {
      std::size_t a = pick(rng), b = pick(rng);
      if (a == b || g.has_edge(a, b)) continue;
      added.insert(Edge{std::min(a, b), std::max(a, b)});
    }
  } else {
    std::vector<Edge> pool;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (!g.has_edge(i, j)) pool.push_back(Edge{i, j});
    std::shuffle(pool.begin(), pool.end(), rng);
    added.insert(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(count));
  }
  edges.insert(edges.end(), added.begin(), added.end());
  return Graph::from_edges(n, edges);
}

Graph random_matched_graph(const Graph& g, std::size_t keep, std::uint64_t seed) {
  if (keep > g.num_edges()) throw ContractError("random_matched_graph: keep exceeds edge count");
  std::vector<EdgeId> ids(g.num_edges());
  std::iota(ids.begin(), ids.end(), EdgeId{0});
  Rng rng = make_rng(seed, streams::kMatchedDrop);
  std::shuffle(ids.begin(), ids.end(), rng);
  std::vector<std::uint8_t> mask(g.num_edges(), 0);
  for (std::size_t k = 0; k < keep; ++k) mask[ids[k]] = 1;
  return g.subgraph(mask);
}

BaselineResult run_baseline(BaselineKind kind, const Dataset& d, const TrainConfig& cfg,
                            double drop_rate, const TrainHooks& hooks) {
  cfg.validate();
  d.labels.validate();
  if (kind == BaselineKind::dropedge && !(drop_rate >= 0.0 && drop_rate < 1.0)) {
    throw ContractError("run_baseline: drop rate must lie in [0, 1)");
  }
  const Graph& g = d.graph;
  GcnParams theta = init_gcn(d.features.cols(), cfg.hidden, d.labels.num_classes, cfg.seed,
                             streams::kThetaInit, "theta");
  auto params = theta.list();
  const SparseMatrix full_prop = normalize_adjacency(g.adjacency());
  BaselineResult out;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    MetricsRecord rec;
    rec.epoch = epoch;
    SparseMatrix dropped_prop;
    const SparseMatrix* prop = &full_prop;
    rec.kept_edges = g.num_edges();
    if (kind == BaselineKind::dropedge && drop_rate > 0.0) {
      Rng rng = make_rng(cfg.seed, streams::kPerEpochBase * static_cast<std::uint64_t>(epoch + 1) +
                                       streams::kRandomDrop);
      std::bernoulli_distribution keep(1.0 - drop_rate);
      std::vector<std::uint8_t> mask(g.num_edges());
      for (auto& m : mask) m = keep(rng) ? 1 : 0;
      const Graph kept = g.subgraph(mask);
      rec.kept_edges = kept.num_edges();
      dropped_prop = normalize_adjacency(kept.adjacency());
      prop = &dropped_prop;
    }
    {
      Tape tape;
      Var logits = gcn_forward(tape, theta, tape.constant(d.features), *prop);
      Var loss = classification_loss(tape, logits, d.labels);
      rec.l_ce = tape.value(loss)(0, 0);
      tape.backward(loss);
      optimizer_step(params, cfg);
    }
    const Matrix eval_logits = gcn_infer(theta, d.features, full_prop);
    rec.val_acc = d.labels.val.empty() ? 0.0 : accuracy(eval_logits, d.labels, SplitKind::val);
    rec.test_acc = d.labels.test.empty() ? 0.0 : accuracy(eval_logits, d.labels, SplitKind::test);
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (rec.val_acc > out.best_val_acc) {
      out.best_epoch = epoch;
      out.best_val_acc = rec.val_acc;
      out.best_test_acc = rec.test_acc;
    }
    out.metrics.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);
    if (epoch - out.best_epoch >= cfg.patience) break;
  }
  return out;
}

RetrainComparison retrain_on_learned_graph(const Graph& learned, bool random_matched,
                                           const Dataset& d, const TrainConfig& cfg,
                                           const TrainHooks& learned_hooks) {
  if (learned.num_nodes() != d.graph.num_nodes()) {
    throw ContractError("retrain: learned graph has a different node count");
  }
  for (const Edge& e : learned.edges())
    if (!d.graph.has_edge(e.u, e.v)) throw ContractError("retrain: learned graph has an edge not in the input graph");

  RetrainComparison out;
  out.kept_edges = learned.num_edges();
  out.deleted_pct = d.graph.num_edges() == 0
                        ? 0.0
                        : 100.0 * static_cast<double>(d.graph.num_edges() - learned.num_edges()) /
                              static_cast<double>(d.graph.num_edges());
  Dataset ad{learned, d.features, d.labels};
  out.acc_learned = run_baseline(BaselineKind::plain, ad, cfg, 0.0, learned_hooks).best_test_acc;
  if (random_matched) {
    Dataset rd{random_matched_graph(d.graph, learned.num_edges(), cfg.seed), d.features, d.labels};
    if (rd.graph.num_edges() != learned.num_edges()) throw ContractError("retrain: matched edge count differs");
    out.acc_random = run_baseline(BaselineKind::plain, rd, cfg, 0.0).best_test_acc;
  }
  return out;
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.n = values.size();
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.n);
  s.single = s.n == 1;
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

void write_run_summary(const std::filesystem::path& file,
                       const std::vector<std::pair<std::string, std::string>>& kv) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + file.string());
  for (const auto& [k, v] : kv) out << k << '\t' << v << '\n';
  if (!out) throw IoError("write failure on " + file.string());
}

namespace {

struct RunData {
  std::filesystem::path dir;
  std::map<std::string, std::string> kv;
  std::vector<nlohmann::json> curve;
};

std::map<std::string, std::string> read_kv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    auto tab = line.find('\t');
    if (tab == std::string::npos) continue;
    kv[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return kv;
}

double num(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) return std::nan("");
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    return std::nan("");
  }
}

}  // namespace

ReportOutput report(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<RunData> runs;
  std::vector<std::filesystem::path> found;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().filename() == "summary.tsv" &&
        std::filesystem::exists(entry.path().parent_path() / "metrics.jsonl")) {
      found.push_back(entry.path().parent_path());
    }
  }
  if (found.empty()) throw IoError("no runs (summary.tsv + metrics.jsonl) under " + dir.string());
  std::sort(found.begin(), found.end());
  for (const auto& run_dir : found) {
    RunData r;
    r.dir = run_dir;
    r.kv = read_kv(run_dir / "summary.tsv");
    std::ifstream in(run_dir / "metrics.jsonl");
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) r.curve.push_back(nlohmann::json::parse(line));
    runs.push_back(std::move(r));
  }

  // run_<k> directories are repeats of their parent's configuration.
  std::map<std::string, std::vector<const RunData*>> groups;
  for (const auto& r : runs) {
    auto rel = std::filesystem::relative(r.dir, dir);
    if (rel.filename().string().rfind("run_", 0) == 0) rel = rel.parent_path();
    const std::string key = rel.empty() ? std::string(".") : rel.generic_string();
    groups[key].push_back(&r);
  }

  ReportOutput out;
  out.runs = runs.size();
  out.summary_file = dir / "report_summary.tsv";
  out.curves_file = dir / "report_curves.tsv";
  {
    std::ofstream s(out.summary_file, std::ios::binary | std::ios::trunc);
    s << "group\tmethod\tn\ttest_mean\ttest_std\tval_mean\tval_std\tkept_mean\tsingle_repeat\n";
    for (const auto& [key, members] : groups) {
      std::vector<double> test, val, kept;
      for (const RunData* r : members) {
        test.push_back(num(r->kv, "test_acc"));
        val.push_back(num(r->kv, "best_val_acc"));
        kept.push_back(num(r->kv, "kept_edges"));
      }
      const Summary t = summarize(test), v = summarize(val), k = summarize(kept);
      auto method = members.front()->kv.count("method") ? members.front()->kv.at("method") : "";
      s << key << '\t' << method << '\t' << t.n << '\t' << fmt6(t.mean) << '\t' << fmt6(t.std) << '\t'
        << fmt6(v.mean) << '\t' << fmt6(v.std) << '\t' << fmt6(k.mean) << '\t' << (t.single ? 1 : 0)
        << '\n';
    }
    if (!s) throw IoError("write failure on " + out.summary_file.string());
  }
  {
    std::ofstream c(out.curves_file, std::ios::binary | std::ios::trunc);
    c << "group\tepoch\tl_ce\tl_lg\tval_acc\ttest_acc\tkept_edges\truns\n";
    for (const auto& [key, members] : groups) {
      std::size_t max_epoch = 0;
      for (const RunData* r : members) max_epoch = std::max(max_epoch, r->curve.size());
      for (std::size_t e = 0; e < max_epoch; ++e) {
        double ce = 0, lg = 0, va = 0, te = 0, ke = 0;
        std::size_t cnt = 0, lg_cnt = 0;
        for (const RunData* r : members) {
          if (e >= r->curve.size()) continue;
          const auto& j = r->curve[e];
          ++cnt;
          ce += j.value("l_ce", 0.0);
          va += j.value("val_acc", 0.0);
          te += j.value("test_acc", 0.0);
          ke += j.value("kept_edges", 0.0);
          if (j.contains("l_lg") && j["l_lg"].is_number()) {
            lg += j["l_lg"].get<double>();
            ++lg_cnt;
          }
        }
        const double dc = static_cast<double>(cnt);
        c << key << '\t' << e + 1 << '\t' << fmt6(ce / dc) << '\t'
          << (lg_cnt ? fmt6(lg / static_cast<double>(lg_cnt)) : std::string("nan")) << '\t'
          << fmt6(va / dc) << '\t' << fmt6(te / dc) << '\t' << fmt6(ke / dc) << '\t' << cnt << '\n';
      }
    }
    if (!c) throw IoError("write failure on " + out.curves_file.string());
  }

  std::map<double, std::vector<const RunData*>> by_mu;
  for (const auto& r : runs) {
    const double mu = num(r.kv, "mu");
    if (std::isfinite(mu) && r.kv.count("sweep")) by_mu[mu].push_back(&r);
  }
  if (!by_mu.empty()) {
    out.sweep_file = dir / "sweep_grid.tsv";
    std::ofstream s(*out.sweep_file, std::ios::binary | std::ios::trunc);
    s << "mu\tn\ttest_mean\ttest_std\tkept_mean\n";
    for (const auto& [mu, members] : by_mu) {
      std::vector<double> test, kept;
      for (const RunData* r : members) {
        test.push_back(num(r->kv, "test_acc"));
        kept.push_back(num(r->kv, "kept_edges"));
      }
      const Summary t = summarize(test), k = summarize(kept);
      s << fmt6(mu) << '\t' << t.n << '\t' << fmt6(t.mean) << '\t' << fmt6(t.std) << '\t'
        << fmt6(k.mean) << '\n';
    }
    if (!s) throw IoError("write failure on " + out.sweep_file->string());
  }
  return out;
}

}  // namespace adedgedrop
