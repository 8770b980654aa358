#ifndef ADEDGEDROP_TRAINER_HPP
#define ADEDGEDROP_TRAINER_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "adedgedrop/adversary.hpp"
#include "adedgedrop/backbone.hpp"
#include "adedgedrop/graph.hpp"
#include "adedgedrop/linegraph.hpp"

namespace adedgedrop {

enum class OptimizerKind { adam, sgd };

struct TrainConfig {
  double mu = 0.7;          ///< keep threshold, shared by mask and supervision
  double alpha = 0.5;       ///< line-graph feature trade-off
  double gamma = 0.1;       ///< PGD step size
  int eta = 5;              ///< PGD steps per epoch
  double epsilon = 0.05;    ///< l-inf radius of the perturbation
  double lr = 0.01;
  int epochs = 1000;        ///< hard cap
  int patience = 200;       ///< early stop after this many epochs without a better val accuracy
  std::size_t hidden = 16;
  std::uint64_t seed = 0;
  double p_pre = 0.0;       ///< pre-dropping similarity threshold; 0 disables
  std::optional<double> sigma;
  bool adversarial = true;  ///< false: epsilon = 0, eta = 1, no PGD
  double random_drop_rate = 0.0;  ///< per-epoch random drop of pre-dropped edges
  OptimizerKind optimizer = OptimizerKind::adam;
  LineGraphLossKind lg_loss = LineGraphLossKind::positive_only;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
  int effective_eta() const { return adversarial ? eta : 1; }
  double effective_epsilon() const { return adversarial ? epsilon : 0.0; }
};

struct MetricsRecord {
  int epoch = 0;
  std::optional<double> l_lg;  ///< empty when no edge is a positive
  double l_ce = 0.0;
  double val_acc = 0.0;
  double test_acc = 0.0;
  std::size_t kept_edges = 0;
  double wall_ms = 0.0;
};

/// One JSON object, keys in snake case, floats with 6 significant digits.
/// wall_ms is written only when `with_timing` is set so default streams are
/// reproducible byte for byte.
std::string to_json_line(const MetricsRecord& r, bool with_timing = false);

/// JSON Lines file that accepts appends from several threads.
class MetricsSink {
 public:
  explicit MetricsSink(const std::filesystem::path& file, bool with_timing = false);
  void append(const MetricsRecord& r);

 private:
  std::mutex mutex_;
  std::ofstream out_;
  bool with_timing_;
};

struct TrainState {
  GcnParams theta;
  EdgePredictorParams omega;
  Perturbation delta;
  LineGraphFeatures x_lg;
  int epoch = 0;

  bool has_checkpoint = false;
  int best_epoch = 0;
  double best_val_acc = -1.0;
  double best_test_acc = 0.0;
  EdgeMask best_mask;  ///< over the edges of the training graph
  GcnParams best_theta;
  EdgePredictorParams best_omega;
};

struct TrainDiagnostics {
  double sigma = 0.0;
  std::size_t kappa = 0;
  std::size_t line_graph_nodes = 0;
  std::size_t line_graph_edges = 0;
  std::size_t pre_dropped = 0;
  bool used_random_projection = false;
};

struct TrainHooks {
  std::function<void(const MetricsRecord&)> on_epoch;
  /// Called with the perturbation after each PGD step.
  std::function<void(int epoch, int step, const Perturbation&)> on_pgd_step;
  /// Keep probabilities (line-graph node order) behind each epoch's final mask.
  std::function<void(int epoch, std::span<const double> keep_prob)> on_keep_prob;
};

struct TrainResult {
  TrainState state;
  std::vector<MetricsRecord> metrics;
  TrainDiagnostics diagnostics;
};

/// Alternating adversarial training. Each epoch draws a fresh perturbation,
/// runs eta PGD ascent steps on it against the line-graph loss while
/// accumulating predictor gradients, takes one predictor step with their
/// mean, one backbone step on the graph corrupted by the final perturbation,
/// refreshes the line-graph features and evaluates on the complete graph.
TrainResult train(const Graph& g, const FeatureMatrix& x, const LabelSplit& labels,
                  const TrainConfig& cfg, const TrainHooks& hooks = {});

/// Validation and test accuracy with the full graph. Uses the checkpointed
/// backbone when there is one.
std::pair<double, double> evaluate(const TrainState& state, const Graph& g, const FeatureMatrix& x,
                                   const LabelSplit& labels);

struct ExportSummary {
  std::size_t total_edges = 0;
  std::size_t kept_edges = 0;
  double deleted_pct = 0.0;
};

/// Writes the checkpointed surviving edges in edges.tsv format.
ExportSummary export_learned_graph(const TrainState& state, const Graph& g,
                                   const std::filesystem::path& out);

/// Backbone optimizer step selected by the config.
void optimizer_step(std::span<Parameter* const> params, const TrainConfig& cfg);

}  // namespace adedgedrop

#endif  // ADEDGEDROP_TRAINER_HPP
