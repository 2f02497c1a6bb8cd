#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pinntl/network/network.hpp"
#include "pinntl/training/problem.hpp"
#include "pinntl/training/trainer.hpp"

namespace pinntl::transfer {

/// None trains the target from a fresh initialization (the no-transfer
/// baseline); the other kinds start from the source parameters.
enum class Kind { None, Full, Light, Lora };

struct Strategy {
  Kind kind = Kind::Full;
  int rank = 4;
  double alpha = 1.0;

  static Strategy none() { return {Kind::None, 0, 1.0}; }
  static Strategy full() { return {Kind::Full, 0, 1.0}; }
  static Strategy light() { return {Kind::Light, 0, 1.0}; }
  static Strategy lora(int rank, double alpha = 1.0) { return {Kind::Lora, rank, alpha}; }

  /// "none", "full", "light" or "lora" (rank reported separately).
  std::string name() const;
  /// `name()` plus the rank for LoRA, e.g. "lora_r4".
  std::string tag() const;
};

/// Accepts none | full | light | lora:<r> | lora:<r>:<alpha>.
Strategy parse_strategy(const std::string& text);

/// Folds LoRA adapters into the base weights and drops them; plain networks
/// are returned unchanged. Masks are reset to all-trainable.
Network merged(const Network& net);

/// Target network for a strategy. `target_sizes` must equal the source
/// architecture except for None, which builds a fresh network from `seed`.
/// LoRA adapters are drawn from `seed` as well. Throws TransferError on an
/// architecture mismatch.
Network apply_strategy(const Network& source, const std::vector<int>& target_sizes,
                       const Strategy& strategy, std::uint64_t seed);

struct Budget {
  int source_epochs = 1000;
  int target_epochs = 1000;
  int eval_every = 100;
  // Epochs averaged by the rank sweep's tail error.
  int tail_window = 1000;
  AdamConfig adam;
};

/// Directory for cached source checkpoints: PINNTL_CACHE_DIR if set.
std::optional<std::filesystem::path> cache_dir_from_env();

/// Key of a cached source run: depends on the problem tag, architecture,
/// seed, epochs and optimizer settings.
std::string source_cache_key(const Problem& source, std::uint64_t seed, int epochs,
                             const AdamConfig& adam);

struct SourceRun {
  Network net;
  bool from_cache = false;
  std::optional<TrainResult> result;  // empty when loaded from the cache
};

/// Trains a fresh network (seeded) on the source problem, or loads it from
/// `cache_dir` when an entry for the same key exists.
SourceRun train_source(const Problem& source, const Budget& budget, std::uint64_t seed,
                       const std::optional<std::filesystem::path>& cache_dir);

struct TransferResult {
  Network target;
  TrainResult run;
  bool source_from_cache = false;
};

/// Trains (or loads) the source, applies the strategy and trains the target.
/// Throws TransferError when the two problems belong to different families.
TransferResult run_transfer(const Problem& source, const Problem& target, const Strategy& strategy,
                            const Budget& budget, std::uint64_t seed,
                            const std::optional<std::filesystem::path>& cache_dir = {},
                            const EpochCallback& on_epoch = {});

/// Fine-tunes an already trained source on the target.
TransferResult fine_tune(const Network& source, const Problem& target, const Strategy& strategy,
                         const Budget& budget, std::uint64_t seed, const EpochCallback& on_epoch = {});

/// Mean rel_l2 over the evaluations in the last `window` epochs of a run.
double tail_error(const TrainResult& run, int window = 1000);

struct SweepRow {
  int rank = 0;
  double error = 0.0;  // tail_error of the target run
  double final_rel_l2 = 0.0;
  std::size_t trainable_params = 0;
  double seconds_per_1k_epochs = 0.0;
};

/// One LoRA run per rank from a single source, rows sorted by rank. Ranks
/// must lie in [1, 100].
std::vector<SweepRow> rank_sweep(const Problem& source, const Problem& target, std::vector<int> ranks,
                                 const Budget& budget, std::uint64_t seed, double alpha = 1.0,
                                 const std::optional<std::filesystem::path>& cache_dir = {});

/// dot(a, b) / (‖a‖‖b‖). Throws ShapeError for unequal or empty vectors and
/// UndefinedNormError for a zero vector.
double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct ChainResult {
  Network final_net;
  std::vector<TrainResult> stages;
};

/// Trains the problems in order, carrying parameters between stages with the
/// strategy. Stage 0 starts from a fresh network. `budgets` must sum to
/// `total_epochs`.
ChainResult chain_run(const std::vector<const Problem*>& problems, const std::vector<int>& budgets,
                      int total_epochs, const Strategy& strategy, std::uint64_t seed,
                      int eval_every = 100, const AdamConfig& adam = {},
                      const EpochCallback& on_epoch = {});

}  // namespace pinntl::transfer
