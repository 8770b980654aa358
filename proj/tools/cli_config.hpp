#ifndef ADEDGEDROP_TOOLS_CLI_CONFIG_HPP
#define ADEDGEDROP_TOOLS_CLI_CONFIG_HPP

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "adedgedrop/harness.hpp"
#include "adedgedrop/trainer.hpp"

namespace adedgedrop::cli {

/// Every key accepted in a config file or as a --flag.
const std::vector<std::string>& known_keys();

using KeyValues = std::map<std::string, std::string>;

/// "key = value" lines; '#' starts a comment. Throws ParseError on malformed
/// lines and unknown keys.
KeyValues read_config_file(const std::filesystem::path& file);

struct ExperimentSpec {
  std::string command;
  TrainConfig train;
  SbmSpec sbm;
  std::optional<std::filesystem::path> data;  ///< dataset directory; SBM when empty
  std::filesystem::path out = "run";
  std::size_t repeats = 1;
  std::size_t jobs = 1;
  AttackKind attack = AttackKind::none;
  double attack_rate = 0.2;
  std::optional<BaselineKind> baseline;  ///< attack-eval: model under attack, empty = ADEdgeDrop
  double drop_rate = 0.5;
  std::optional<std::filesystem::path> learned;
  bool random_matched = true;
  std::vector<double> sweep_mu{0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  bool timing = false;
  bool quiet = false;

  /// Throws ConfigError.
  void validate() const;
};

/// Applies key/values over the defaults. Throws ConfigError on bad values.
ExperimentSpec build_spec(const std::string& command, const KeyValues& kv);

/// Canonical "key = value" dump of every setting, sorted by key.
std::string echo(const ExperimentSpec& spec);

}  // namespace adedgedrop::cli

#endif  // ADEDGEDROP_TOOLS_CLI_CONFIG_HPP
