#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pinntl/harness/config.hpp"

namespace pinntl::harness {

/// Git-style description of the build, baked in at configure time.
const char* build_id() noexcept;

/// Short label for CSV columns, e.g. "w=2pi", "sym", "circle".
std::string short_label(const ProblemConfig& p);

/// One row of runs.csv.
struct RunRow {
  std::string run_id, family, source, target, strategy;
  int rank = 0;
  std::uint64_t seed = 0;
  int epoch = 0;
  double loss = 0.0, rel_l2 = 0.0, rel_h1 = 0.0;
  std::size_t trainable_params = 0, tape_nodes = 0;
  double seconds_per_1k_epochs = 0.0;
  std::string config_hash;
};

inline constexpr const char* kRunsHeader =
    "run_id,family,source,target,strategy,rank,seed,epoch,loss,rel_l2,rel_h1,trainable_params,"
    "tape_nodes,seconds_per_1k_epochs,config_hash,build_id";

std::string format_row(const RunRow& r);

/// Error-vs-epoch chart (log y) of `column` for every run_id in a runs.csv.
/// Pure function of the CSV content.
void plot_runs_svg(const std::filesystem::path& runs_csv, const std::filesystem::path& svg,
                   const std::string& column = "rel_l2");

struct Options {
  std::string out_dir;  // overrides the config when non-empty
  std::vector<std::uint64_t> seeds;  // overrides the config when non-empty
  bool plots = false;
  bool full_grid = false;  // oracle: 401 x 101 nodes
  bool quiet = false;
};

/// Subcommands. Each returns a process exit status; configuration problems
/// surface as ConfigError and non-finite losses as DivergenceError.
int cmd_train(const ExperimentConfig& cfg, const Options& opt);
int cmd_transfer(const ExperimentConfig& cfg, const Options& opt);
int cmd_sweep(const ExperimentConfig& cfg, const Options& opt);
int cmd_chain(const ExperimentConfig& cfg, const Options& opt);
int cmd_eval(const ExperimentConfig& cfg, const Options& opt);
int cmd_oracle(const ExperimentConfig& cfg, const Options& opt);

/// Loads the config at `config_path`, checks the keys the command needs and
/// dispatches. Maps ConfigError to 2, DivergenceError to 3, other errors to 1.
int run_command(const std::string& command, const std::string& config_path, const Options& opt);

}  // namespace pinntl::harness
