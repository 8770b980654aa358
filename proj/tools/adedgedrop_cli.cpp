#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "adedgedrop/error.hpp"
#include "adedgedrop/graph.hpp"
#include "adedgedrop/harness.hpp"
#include "adedgedrop/log.hpp"
#include "adedgedrop/trainer.hpp"
#include "cli_config.hpp"

namespace fs = std::filesystem;
using namespace adedgedrop;
using cli::ExperimentSpec;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitContract = 3;

std::string f6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

using Kv = std::vector<std::pair<std::string, std::string>>;

struct Inputs {
  Dataset data;
  std::optional<std::vector<Edge>> noisy;
};

Inputs load_inputs(const ExperimentSpec& spec, std::uint64_t seed) {
  if (spec.data) {
    Inputs in{load_dataset(*spec.data), std::nullopt};
    const fs::path noisy = *spec.data / "noisy_edges.tsv";
    if (fs::exists(noisy)) {
      const Graph ng = load_graph(noisy, in.data.graph.num_nodes());
      in.noisy = std::vector<Edge>(ng.edges().begin(), ng.edges().end());
    }
    return in;
  }
  SbmSpec sbm = spec.sbm;
  sbm.seed = seed;
  SbmDataset s = gen_sbm(sbm);
  return {std::move(s.data), std::move(s.noisy_edges)};
}

std::mutex g_stdout_mutex;

void say(const ExperimentSpec& spec, const std::string& line) {
  if (spec.quiet) return;
  std::lock_guard lock(g_stdout_mutex);
  std::cout << line << '\n';
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw IoError("write failure on " + file.string());
}

/// Directory, seed and a spec copy for one repeat.
struct Job {
  fs::path dir;
  ExperimentSpec spec;
  std::optional<double> sweep_mu;
};

Job make_job(const ExperimentSpec& base, const fs::path& parent, std::size_t k) {
  Job j{base.repeats == 1 ? parent : parent / ("run_" + std::to_string(k)), base, std::nullopt};
  j.spec.train.seed = base.train.seed + k;
  j.spec.sbm.seed = j.spec.train.seed;
  return j;
}

TrainHooks sink_hooks(MetricsSink& sink) {
  TrainHooks h;
  h.on_epoch = [&sink](const MetricsRecord& r) { sink.append(r); };
  return h;
}

void add_noise_stats(Kv& kv, const Inputs& in, const Graph& g, const EdgeMask& mask) {
  if (!in.noisy) return;
  const std::set<Edge> noisy(in.noisy->begin(), in.noisy->end());
  std::size_t dropped = 0, dropped_noisy = 0, total_noisy = 0;
  const auto edges = g.edges();
  for (std::size_t p = 0; p < edges.size(); ++p) {
    const bool is_noisy = noisy.count(edges[p]) > 0;
    total_noisy += is_noisy;
    if (!mask.keep[p]) {
      ++dropped;
      dropped_noisy += is_noisy;
    }
  }
  kv.emplace_back("noise_edges", std::to_string(total_noisy));
  kv.emplace_back("dropped_noise_edges", std::to_string(dropped_noisy));
  kv.emplace_back("noise_frac_overall",
                  f6(edges.empty() ? 0.0 : static_cast<double>(total_noisy) / static_cast<double>(edges.size())));
  kv.emplace_back("noise_frac_dropped",
                  f6(dropped == 0 ? 0.0 : static_cast<double>(dropped_noisy) / static_cast<double>(dropped)));
}

void begin_run(const Job& job) {
  fs::create_directories(job.dir);
  write_text(job.dir / "config.echo", cli::echo(job.spec));
}

// ---- commands, one repeat each ----

void run_train(const Job& job) {
  const ExperimentSpec& s = job.spec;
  begin_run(job);
  const Inputs in = load_inputs(s, s.train.seed);
  MetricsSink sink(job.dir / "metrics.jsonl", s.timing);
  const TrainResult res = train(in.data.graph, in.data.features, in.data.labels, s.train, sink_hooks(sink));
  const ExportSummary ex = export_learned_graph(res.state, in.data.graph, job.dir / "learned_edges.tsv");
  Kv kv{{"method", "adedgedrop"},
        {"seed", std::to_string(s.train.seed)},
        {"mu", f6(s.train.mu)},
        {"best_epoch", std::to_string(res.state.best_epoch)},
        {"epochs_run", std::to_string(res.metrics.size())},
        {"best_val_acc", f6(res.state.best_val_acc)},
        {"test_acc", f6(res.state.best_test_acc)},
        {"total_edges", std::to_string(ex.total_edges)},
        {"kept_edges", std::to_string(ex.kept_edges)},
        {"deleted_pct", f6(ex.deleted_pct)},
        {"sigma", f6(res.diagnostics.sigma)},
        {"kappa", std::to_string(res.diagnostics.kappa)},
        {"line_graph_nodes", std::to_string(res.diagnostics.line_graph_nodes)},
        {"line_graph_edges", std::to_string(res.diagnostics.line_graph_edges)},
        {"pre_dropped", std::to_string(res.diagnostics.pre_dropped)}};
  if (job.sweep_mu) kv.emplace_back("sweep", f6(*job.sweep_mu));
  add_noise_stats(kv, in, in.data.graph, res.state.best_mask);
  write_run_summary(job.dir / "summary.tsv", kv);
  say(s, job.dir.generic_string() + ": test_acc " + f6(res.state.best_test_acc) + " kept " +
             std::to_string(ex.kept_edges) + "/" + std::to_string(ex.total_edges));
}

void run_baseline_cmd(const Job& job) {
  const ExperimentSpec& s = job.spec;
  begin_run(job);
  const Inputs in = load_inputs(s, s.train.seed);
  const BaselineKind kind = s.baseline.value_or(BaselineKind::plain);
  MetricsSink sink(job.dir / "metrics.jsonl", s.timing);
  const BaselineResult res =
      run_baseline(kind, in.data, s.train, kind == BaselineKind::dropedge ? s.drop_rate : 0.0, sink_hooks(sink));
  write_edges(job.dir / "learned_edges.tsv", in.data.graph.edges());
  write_run_summary(job.dir / "summary.tsv",
                    {{"method", kind == BaselineKind::plain ? "plain" : "dropedge"},
                     {"seed", std::to_string(s.train.seed)},
                     {"drop_rate", f6(kind == BaselineKind::dropedge ? s.drop_rate : 0.0)},
                     {"best_epoch", std::to_string(res.best_epoch)},
                     {"epochs_run", std::to_string(res.metrics.size())},
                     {"best_val_acc", f6(res.best_val_acc)},
                     {"test_acc", f6(res.best_test_acc)},
                     {"total_edges", std::to_string(in.data.graph.num_edges())},
                     {"kept_edges", std::to_string(in.data.graph.num_edges())}});
  say(s, job.dir.generic_string() + ": test_acc " + f6(res.best_test_acc));
}

void run_attack_eval(const Job& job) {
  const ExperimentSpec& s = job.spec;
  begin_run(job);
  const Inputs in = load_inputs(s, s.train.seed);
  Dataset attacked{attack_graph(in.data.graph, s.attack, s.attack_rate, s.train.seed), in.data.features,
                   in.data.labels};
  MetricsSink sink(job.dir / "metrics.jsonl", s.timing);
  double clean = 0.0, hit = 0.0, val = 0.0;
  std::size_t kept = attacked.graph.num_edges();
  std::string method;
  if (s.baseline) {
    const double rate = *s.baseline == BaselineKind::dropedge ? s.drop_rate : 0.0;
    method = *s.baseline == BaselineKind::plain ? "plain" : "dropedge";
    clean = run_baseline(*s.baseline, in.data, s.train, rate).best_test_acc;
    const BaselineResult r = run_baseline(*s.baseline, attacked, s.train, rate, sink_hooks(sink));
    hit = r.best_test_acc;
    val = r.best_val_acc;
    write_edges(job.dir / "learned_edges.tsv", attacked.graph.edges());
  } else {
    method = "adedgedrop";
    clean = train(in.data.graph, in.data.features, in.data.labels, s.train).state.best_test_acc;
    const TrainResult r = train(attacked.graph, attacked.features, attacked.labels, s.train, sink_hooks(sink));
    hit = r.state.best_test_acc;
    val = r.state.best_val_acc;
    kept = export_learned_graph(r.state, attacked.graph, job.dir / "learned_edges.tsv").kept_edges;
  }
  const char* attack = s.attack == AttackKind::add ? "add" : s.attack == AttackKind::remove ? "remove" : "none";
  write_run_summary(job.dir / "summary.tsv", {{"method", method},
                                             {"seed", std::to_string(s.train.seed)},
                                             {"attack", attack},
                                             {"attack_rate", f6(s.attack_rate)},
                                             {"clean_test_acc", f6(clean)},
                                             {"test_acc", f6(hit)},
                                             {"acc_drop", f6(clean - hit)},
                                             {"best_val_acc", f6(val)},
                                             {"total_edges", std::to_string(attacked.graph.num_edges())},
                                             {"kept_edges", std::to_string(kept)}});
  say(s, job.dir.generic_string() + ": clean " + f6(clean) + " attacked " + f6(hit));
}

void run_retrain(const Job& job) {
  const ExperimentSpec& s = job.spec;
  begin_run(job);
  const Inputs in = load_inputs(s, s.train.seed);
  Graph learned;
  if (s.learned) {
    learned = load_graph(*s.learned, in.data.graph.num_nodes());
    write_edges(job.dir / "learned_edges.tsv", learned.edges());
  } else {
    const TrainResult r = train(in.data.graph, in.data.features, in.data.labels, s.train);
    export_learned_graph(r.state, in.data.graph, job.dir / "learned_edges.tsv");
    learned = load_graph(job.dir / "learned_edges.tsv", in.data.graph.num_nodes());
  }
  MetricsSink sink(job.dir / "metrics.jsonl", s.timing);
  double best_val = -1.0;
  TrainHooks h;
  h.on_epoch = [&](const MetricsRecord& r) {
    sink.append(r);
    best_val = std::max(best_val, r.val_acc);
  };
  const RetrainComparison cmp = retrain_on_learned_graph(learned, s.random_matched, in.data, s.train, h);
  Kv kv{{"method", "retrain"},
        {"seed", std::to_string(s.train.seed)},
        {"total_edges", std::to_string(in.data.graph.num_edges())},
        {"kept_edges", std::to_string(cmp.kept_edges)},
        {"deleted_pct", f6(cmp.deleted_pct)},
        {"acc_learned", f6(cmp.acc_learned)},
        {"test_acc", f6(cmp.acc_learned)},
        {"best_val_acc", f6(best_val)}};
  if (cmp.acc_random) kv.emplace_back("acc_random", f6(*cmp.acc_random));
  write_run_summary(job.dir / "summary.tsv", kv);
  say(s, job.dir.generic_string() + ": learned " + f6(cmp.acc_learned) +
             (cmp.acc_random ? " random " + f6(*cmp.acc_random) : std::string()));
}

void run_jobs(const std::vector<Job>& jobs, std::size_t threads, void (*fn)(const Job&)) {
  threads = std::min(threads, jobs.size());
  if (threads <= 1) {
    for (const Job& j : jobs) fn(j);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < jobs.size(); i = next++) {
        try {
          fn(jobs[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<Job> repeat_jobs(const ExperimentSpec& spec, const fs::path& parent) {
  std::vector<Job> jobs;
  for (std::size_t k = 0; k < spec.repeats; ++k) jobs.push_back(make_job(spec, parent, k));
  return jobs;
}

void cmd_gen_sbm(const ExperimentSpec& spec) {
  SbmSpec sbm = spec.sbm;
  sbm.seed = spec.train.seed;
  const SbmDataset s = gen_sbm(sbm);
  fs::create_directories(spec.out);
  write_text(spec.out / "config.echo", cli::echo(spec));
  save_dataset(spec.out, s.data);
  write_edges(spec.out / "noisy_edges.tsv", s.noisy_edges);
  write_run_summary(spec.out / "summary.tsv", {{"nodes", std::to_string(s.data.graph.num_nodes())},
                                               {"edges", std::to_string(s.data.graph.num_edges())},
                                               {"noise_edges", std::to_string(s.noisy_edges.size())},
                                               {"classes", std::to_string(s.data.labels.num_classes)},
                                               {"feature_dim", std::to_string(s.data.features.cols())}});
  say(spec, spec.out.generic_string() + ": " + std::to_string(s.data.graph.num_nodes()) + " nodes, " +
                std::to_string(s.data.graph.num_edges()) + " edges");
}

void cmd_sweep(const ExperimentSpec& spec) {
  std::vector<Job> jobs;
  for (double mu : spec.sweep_mu) {
    ExperimentSpec m = spec;
    m.train.mu = mu;
    const fs::path parent = spec.out / ("mu_" + f6(mu));
    for (std::size_t k = 0; k < spec.repeats; ++k) {
      Job j = make_job(m, parent, k);
      j.dir = parent / ("run_" + std::to_string(k));
      j.sweep_mu = mu;
      jobs.push_back(std::move(j));
    }
  }
  run_jobs(jobs, spec.jobs, run_train);
  const ReportOutput r = report(spec.out);
  say(spec, "report: " + r.summary_file.generic_string());
}

void cmd_report(const fs::path& dir, const ExperimentSpec& spec) {
  const ReportOutput r = report(dir);
  say(spec, std::to_string(r.runs) + " runs: " + r.summary_file.generic_string() + ", " +
                r.curves_file.generic_string() +
                (r.sweep_file ? ", " + r.sweep_file->generic_string() : std::string()));
}

struct Command {
  const char* name;
  const char* help;
};

constexpr Command kCommands[] = {
    {"train", "train ADEdgeDrop and export the learned graph"},
    {"baseline", "train the plain GCN or DropEdge baseline"},
    {"attack-eval", "compare accuracy before and after a random edge attack"},
    {"retrain", "retrain a plain GCN on the learned graph and on a random graph of equal size"},
    {"gen-sbm", "write a stochastic block model dataset"},
    {"report", "aggregate run directories into summary TSVs"},
    {"sweep", "train over a grid of thresholds mu and report"},
};

int dispatch(const std::string& command, const cli::KeyValues& kv, const std::string& report_dir) {
  cli::KeyValues merged = kv;
  if (command == "attack-eval" && !merged.count("attack")) merged["attack"] = "add";
  if (command == "baseline" && !merged.count("baseline")) merged["baseline"] = "plain";
  const ExperimentSpec spec = cli::build_spec(command, merged);
  log::set_quiet(spec.quiet);

  if (command == "gen-sbm") cmd_gen_sbm(spec);
  else if (command == "report") cmd_report(report_dir.empty() ? spec.out : fs::path(report_dir), spec);
  else if (command == "sweep") cmd_sweep(spec);
  else if (command == "train") run_jobs(repeat_jobs(spec, spec.out), spec.jobs, run_train);
  else if (command == "baseline") run_jobs(repeat_jobs(spec, spec.out), spec.jobs, run_baseline_cmd);
  else if (command == "attack-eval") run_jobs(repeat_jobs(spec, spec.out), spec.jobs, run_attack_eval);
  else if (command == "retrain") run_jobs(repeat_jobs(spec, spec.out), spec.jobs, run_retrain);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ADEdgeDrop: adversarial edge dropping for graph neural networks"};
  app.require_subcommand(1);
  app.fallthrough(false);

  std::string config_file, report_dir;
  std::map<std::string, std::string> flag_values;
  std::map<std::string, std::map<std::string, CLI::Option*>> options;
  std::map<std::string, CLI::App*> subs;

  for (const Command& c : kCommands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    subs[c.name] = sub;
    sub->add_option("--config", config_file, "key = value config file; flags override it");
    if (std::string(c.name) == "report") sub->add_option("dir", report_dir, "directory holding run directories");
    for (const std::string& key : cli::known_keys())
      options[c.name][key] = sub->add_option("--" + key, flag_values[key]);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  std::string command;
  for (const auto& [name, sub] : subs)
    if (sub->parsed()) command = name;

  try {
    cli::KeyValues kv;
    if (!config_file.empty()) kv = cli::read_config_file(config_file);
    for (const auto& [key, opt] : options[command])
      if (opt->count() > 0) kv[key] = flag_values[key];
    return dispatch(command, kv, report_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ContractError& e) {
    std::cerr << "contract violation: " << e.what() << '\n';
    return kExitContract;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitOther;
  }
}
