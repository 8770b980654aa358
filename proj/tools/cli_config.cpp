#include "cli_config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "adedgedrop/error.hpp"

namespace adedgedrop::cli {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end || !std::isfinite(out))
    throw ConfigError(key + ": not a number: '" + v + "'");
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError(key + ": not an integer: '" + v + "'");
  return out;
}

std::size_t to_count(const std::string& key, const std::string& v) {
  const long long x = to_int(key, v);
  if (x < 0) throw ConfigError(key + ": must be non-negative");
  return static_cast<std::size_t>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError(key + ": not a boolean: '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>)
      out += fmt(xs[i]);
    else
      out += std::to_string(xs[i]);
  }
  return out;
}

}  // namespace

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys{
      "mu", "alpha", "gamma", "eta", "epsilon", "lr", "epochs", "patience", "hidden", "seed",
      "p_pre", "sigma", "adversarial", "random_drop_rate", "optimizer", "lg_loss",
      "data", "out", "repeats", "jobs", "attack", "attack_rate", "baseline", "drop_rate",
      "learned", "random_matched", "sweep_mu", "timing", "quiet",
      "sbm_blocks", "sbm_p_intra", "sbm_p_inter", "sbm_noise_edges", "sbm_feature_dim",
      "sbm_separation", "sbm_train_per_class"};
  return keys;
}

KeyValues read_config_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open config file " + file.string());
  const auto& keys = known_keys();
  KeyValues kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError(file.string(), lineno, "expected 'key = value'");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      throw ParseError(file.string(), lineno, "unknown key '" + key + "'");
    kv[key] = value;
  }
  return kv;
}

void ExperimentSpec::validate() const {
  train.validate();
  sbm.validate();
  if (repeats < 1) throw ConfigError("repeats must be at least 1");
  if (jobs < 1) throw ConfigError("jobs must be at least 1");
  if (!(attack_rate >= 0.0 && attack_rate <= 0.4)) throw ConfigError("attack_rate must lie in [0, 0.4]");
  if (!(drop_rate >= 0.0 && drop_rate < 1.0)) throw ConfigError("drop_rate must lie in [0, 1)");
  if (sweep_mu.empty()) throw ConfigError("sweep_mu is empty");
  for (double m : sweep_mu)
    if (!(m >= 0.0 && m <= 1.0)) throw ConfigError("sweep_mu values must lie in [0, 1]");
}

ExperimentSpec build_spec(const std::string& command, const KeyValues& kv) {
  ExperimentSpec s;
  s.command = command;
  TrainConfig& t = s.train;
  for (const auto& [key, v] : kv) {
    if (key == "mu") t.mu = to_double(key, v);
    else if (key == "alpha") t.alpha = to_double(key, v);
    else if (key == "gamma") t.gamma = to_double(key, v);
    else if (key == "eta") t.eta = static_cast<int>(to_int(key, v));
    else if (key == "epsilon") t.epsilon = to_double(key, v);
    else if (key == "lr") t.lr = to_double(key, v);
    else if (key == "epochs") t.epochs = static_cast<int>(to_int(key, v));
    else if (key == "patience") t.patience = static_cast<int>(to_int(key, v));
    else if (key == "hidden") t.hidden = to_count(key, v);
    else if (key == "seed") t.seed = to_count(key, v);
    else if (key == "p_pre") t.p_pre = to_double(key, v);
    else if (key == "sigma") {
      if (v == "auto" || v.empty()) t.sigma.reset();
      else t.sigma = to_double(key, v);
    } else if (key == "adversarial") t.adversarial = to_bool(key, v);
    else if (key == "random_drop_rate") t.random_drop_rate = to_double(key, v);
    else if (key == "optimizer") {
      if (v == "adam") t.optimizer = OptimizerKind::adam;
      else if (v == "sgd") t.optimizer = OptimizerKind::sgd;
      else throw ConfigError("optimizer must be adam or sgd");
    } else if (key == "lg_loss") {
      if (v == "positive") t.lg_loss = LineGraphLossKind::positive_only;
      else if (v == "two_sided") t.lg_loss = LineGraphLossKind::two_sided;
      else throw ConfigError("lg_loss must be positive or two_sided");
    } else if (key == "data") {
      if (v.empty()) s.data.reset();
      else s.data = v;
    } else if (key == "out") s.out = v;
    else if (key == "repeats") s.repeats = to_count(key, v);
    else if (key == "jobs") s.jobs = to_count(key, v);
    else if (key == "attack") {
      if (v == "none") s.attack = AttackKind::none;
      else if (v == "add") s.attack = AttackKind::add;
      else if (v == "remove") s.attack = AttackKind::remove;
      else throw ConfigError("attack must be none, add or remove");
    } else if (key == "attack_rate") s.attack_rate = to_double(key, v);
    else if (key == "baseline") {
      if (v == "none") s.baseline.reset();
      else if (v == "plain") s.baseline = BaselineKind::plain;
      else if (v == "dropedge") s.baseline = BaselineKind::dropedge;
      else throw ConfigError("baseline must be none, plain or dropedge");
    } else if (key == "drop_rate") s.drop_rate = to_double(key, v);
    else if (key == "learned") {
      if (v.empty()) s.learned.reset();
      else s.learned = v;
    } else if (key == "random_matched") s.random_matched = to_bool(key, v);
    else if (key == "sweep_mu") {
      s.sweep_mu.clear();
      for (const auto& item : split_list(v)) s.sweep_mu.push_back(to_double(key, item));
    } else if (key == "timing") s.timing = to_bool(key, v);
    else if (key == "quiet") s.quiet = to_bool(key, v);
    else if (key == "sbm_blocks") {
      s.sbm.block_sizes.clear();
      for (const auto& item : split_list(v)) s.sbm.block_sizes.push_back(to_count(key, item));
    } else if (key == "sbm_p_intra") s.sbm.p_intra = to_double(key, v);
    else if (key == "sbm_p_inter") s.sbm.p_inter = to_double(key, v);
    else if (key == "sbm_noise_edges") s.sbm.noise_edges = to_count(key, v);
    else if (key == "sbm_feature_dim") s.sbm.feature_dim = to_count(key, v);
    else if (key == "sbm_separation") s.sbm.mean_separation = to_double(key, v);
    else if (key == "sbm_train_per_class") s.sbm.train_per_class = to_count(key, v);
    else throw ConfigError("unknown key '" + key + "'");
  }
  s.sbm.seed = t.seed;
  s.validate();
  return s;
}

std::string echo(const ExperimentSpec& s) {
  const TrainConfig& t = s.train;
  const char* attack = s.attack == AttackKind::add ? "add" : s.attack == AttackKind::remove ? "remove" : "none";
  const char* baseline = !s.baseline ? "none" : *s.baseline == BaselineKind::plain ? "plain" : "dropedge";
  std::map<std::string, std::string> kv{
      {"command", s.command},
      {"mu", fmt(t.mu)},
      {"alpha", fmt(t.alpha)},
      {"gamma", fmt(t.gamma)},
      {"eta", std::to_string(t.eta)},
      {"epsilon", fmt(t.epsilon)},
      {"lr", fmt(t.lr)},
      {"epochs", std::to_string(t.epochs)},
      {"patience", std::to_string(t.patience)},
      {"hidden", std::to_string(t.hidden)},
      {"seed", std::to_string(t.seed)},
      {"p_pre", fmt(t.p_pre)},
      {"sigma", t.sigma ? fmt(*t.sigma) : "auto"},
      {"adversarial", t.adversarial ? "true" : "false"},
      {"random_drop_rate", fmt(t.random_drop_rate)},
      {"optimizer", t.optimizer == OptimizerKind::adam ? "adam" : "sgd"},
      {"lg_loss", t.lg_loss == LineGraphLossKind::two_sided ? "two_sided" : "positive"},
      {"data", s.data ? s.data->generic_string() : ""},
      {"out", s.out.generic_string()},
      {"repeats", std::to_string(s.repeats)},
      {"jobs", std::to_string(s.jobs)},
      {"attack", attack},
      {"attack_rate", fmt(s.attack_rate)},
      {"baseline", baseline},
      {"drop_rate", fmt(s.drop_rate)},
      {"learned", s.learned ? s.learned->generic_string() : ""},
      {"random_matched", s.random_matched ? "true" : "false"},
      {"sweep_mu", join(s.sweep_mu)},
      {"timing", s.timing ? "true" : "false"},
      {"quiet", s.quiet ? "true" : "false"},
      {"sbm_blocks", join(s.sbm.block_sizes)},
      {"sbm_p_intra", fmt(s.sbm.p_intra)},
      {"sbm_p_inter", fmt(s.sbm.p_inter)},
      {"sbm_noise_edges", std::to_string(s.sbm.noise_edges)},
      {"sbm_feature_dim", std::to_string(s.sbm.feature_dim)},
      {"sbm_separation", fmt(s.sbm.mean_separation)},
      {"sbm_train_per_class", std::to_string(s.sbm.train_per_class)},
  };
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

}  // namespace adedgedrop::cli
