#ifndef ADEDGEDROP_HARNESS_HPP
#define ADEDGEDROP_HARNESS_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "adedgedrop/graph.hpp"
#include "adedgedrop/trainer.hpp"

namespace adedgedrop {

struct Dataset {
  Graph graph;
  FeatureMatrix features;
  LabelSplit labels;
};

/// Reads edges.tsv, features.tsv, labels.tsv and splits.tsv from `dir`. The
/// node count comes from features.tsv.
Dataset load_dataset(const std::filesystem::path& dir, LoadReport* report = nullptr);
void save_dataset(const std::filesystem::path& dir, const Dataset& d);

struct SbmSpec {
  std::vector<std::size_t> block_sizes{100, 100};
  double p_intra = 0.06;
  double p_inter = 0.005;
  std::size_t noise_edges = 150;
  std::size_t feature_dim = 16;
  double mean_separation = 1.0;
  std::size_t train_per_class = 20;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SbmDataset {
  Dataset data;
  std::vector<Edge> noisy_edges;  ///< injected inter-class edges, sorted
};

/// Stochastic block model with Gaussian features. Class k's feature mean is
/// `mean_separation` on the dimensions d with d mod (#blocks) == k and 0
/// elsewhere; noise is unit variance. The noise edges are drawn uniformly from
/// inter-class non-edges of the block-model graph.
SbmDataset gen_sbm(const SbmSpec& spec);

/// train_per_class labeled nodes per class, then min(500, floor(0.3 n)) for
/// validation, the rest for test. Seeded shuffle.
LabelSplit make_split(std::vector<int> labels, std::size_t num_classes, std::size_t train_per_class,
                      std::uint64_t seed);

enum class AttackKind { none, add, remove };

/// Removes or inserts floor(rate * |E|) uniformly chosen edges.
Graph attack_graph(const Graph& g, AttackKind kind, double rate, std::uint64_t seed);

/// Random subgraph with exactly `keep` of g's edges.
Graph random_matched_graph(const Graph& g, std::size_t keep, std::uint64_t seed);

enum class BaselineKind { plain, dropedge };

struct BaselineResult {
  std::vector<MetricsRecord> metrics;
  int best_epoch = 0;
  double best_val_acc = -1.0;
  double best_test_acc = 0.0;
};

/// GCN on the full graph (plain) or with an independent per-epoch Bernoulli
/// edge drop (dropedge). Evaluation always uses the full graph.
BaselineResult run_baseline(BaselineKind kind, const Dataset& d, const TrainConfig& cfg,
                            double drop_rate, const TrainHooks& hooks = {});

struct RetrainComparison {
  double deleted_pct = 0.0;
  std::size_t kept_edges = 0;
  double acc_learned = 0.0;
  std::optional<double> acc_random;
};

/// Trains fresh plain GCNs on the learned graph and, when requested, on a
/// random graph with the same edge count. Both train and evaluate on their
/// incomplete graph.
RetrainComparison retrain_on_learned_graph(const Graph& learned, bool random_matched,
                                           const Dataset& d, const TrainConfig& cfg,
                                           const TrainHooks& learned_hooks = {});

struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;  ///< sample standard deviation, 0 for a single value
  bool single = false;
};

Summary summarize(const std::vector<double>& values);

struct ReportOutput {
  std::filesystem::path summary_file;
  std::filesystem::path curves_file;
  std::optional<std::filesystem::path> sweep_file;
  std::size_t runs = 0;
};

/// Aggregates every run directory (one holding summary.tsv) below `dir` into
/// groups (run_<k> directories pool into their parent), writing
/// report_summary.tsv and report_curves.tsv, plus sweep_grid.tsv when the
/// runs carry a "mu" key. Throws IoError when no run is found.
ReportOutput report(const std::filesystem::path& dir);

/// Key/value lines of a run's summary.tsv.
void write_run_summary(const std::filesystem::path& file,
                       const std::vector<std::pair<std::string, std::string>>& kv);

}  // namespace adedgedrop

#endif  // ADEDGEDROP_HARNESS_HPP
