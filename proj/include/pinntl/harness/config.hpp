#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pinntl/elasticity/elasticity.hpp"
#include "pinntl/optimizer/adam.hpp"
#include "pinntl/taylor_green/taylor_green.hpp"
#include "pinntl/training/problem.hpp"

namespace pinntl::harness {

/// One problem instance. Only the block matching `family` is meaningful.
struct ProblemConfig {
  Family family = Family::TaylorGreen;
  double w_multiplier = 1.0;  // tg.w = w_multiplier·π
  tg::Spec tg;
  tg::Counts counts;
  std::uint64_t collocation_seed = 0;
  elasticity::BeamSpec beam;
  elasticity::PlateSpec plate;

  std::unique_ptr<Problem> make() const;
  bool operator==(const ProblemConfig&) const = default;
};

struct ExperimentConfig {
  // Problem for train / eval / oracle.
  std::optional<ProblemConfig> problem;
  // Pair for transfer / sweep.
  std::optional<ProblemConfig> source, target;
  // Sequence for chain.
  std::vector<ProblemConfig> chain;
  std::vector<int> chain_budgets;

  std::vector<std::string> strategies;
  std::vector<int> ranks;
  double lora_alpha = 1.0;

  int epochs = 0;
  int source_epochs = 0;
  int target_epochs = 0;
  int eval_every = 100;
  int tail_window = 1000;  // epochs averaged for tail errors
  AdamConfig adam;
  std::vector<std::uint64_t> seeds{0};
  std::string output_dir = "out";
  bool plots = false;
  std::string checkpoint;  // eval input

  // Dotted keys that were present in the parsed text; not serialized.
  std::vector<std::string> present;

  /// Compares every serialized field (ignores `present`).
  bool operator==(const ExperimentConfig& o) const;
};

/// Parses JSON text. Unknown keys and type mismatches raise ConfigError with
/// the dotted key path. Requirements per subcommand are checked separately.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Canonical JSON (sorted keys, every field written). parse(serialize(c)) == c.
std::string serialize_config(const ExperimentConfig& cfg);

/// FNV-1a of the canonical serialization, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

/// Throws ConfigError naming the first key `command` needs but the file lacks.
void require_for(const std::string& command, const ExperimentConfig& cfg);

}  // namespace pinntl::harness
