#include <CLI11.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include "pinntl/harness/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Physics-informed networks with parameter transfer"};
  app.require_subcommand(1);
  std::string config;
  pinntl::harness::Options opt;
  std::vector<std::uint64_t> seeds;

  const std::vector<std::pair<const char*, const char*>> commands = {
      {"train", "Train one problem from scratch"},
      {"transfer", "Source training plus one fine-tuning run per strategy"},
      {"sweep", "LoRA rank sweep"},
      {"chain", "Sequential multi-stage transfer with a single-stage baseline"},
      {"eval", "Recompute metrics from a checkpoint"},
      {"oracle", "Reference beam solution"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "JSON experiment file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out_dir, "Output directory (overrides the config)");
    sub->add_option("--seed", seeds, "Seed(s) (override the config)");
    sub->add_flag("--plots", opt.plots, "Write SVG charts");
    sub->add_flag("--quiet", opt.quiet, "Suppress progress lines");
    if (std::string(name) == "oracle") sub->add_flag("--full", opt.full_grid, "Use the 401 x 101 grid");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  opt.seeds = seeds;
  return pinntl::harness::run_command(app.get_subcommands().front()->get_name(), config, opt);
}
