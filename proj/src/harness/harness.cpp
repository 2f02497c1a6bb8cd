#include "pinntl/harness/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>

#include "pinntl/elasticity/problems.hpp"
#include "pinntl/errors.hpp"
#include "pinntl/network/checkpoint.hpp"
#include "pinntl/oracle/beam_fd.hpp"
#include "pinntl/training/trainer.hpp"
#include "pinntl/transfer/transfer.hpp"

#ifndef PINNTL_BUILD_ID
#define PINNTL_BUILD_ID "unknown"
#endif

namespace pinntl::harness {

namespace fs = std::filesystem;

const char* build_id() noexcept { return PINNTL_BUILD_ID; }

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string pi_multiple(double w) {
  const double k = w / std::numbers::pi;
  char buf[40];
  if (std::abs(k - std::round(k)) < 1e-12 && k >= 1.0) {
    std::snprintf(buf, sizeof buf, "w=%gpi", std::round(k));
  } else {
    std::snprintf(buf, sizeof buf, "w=%.6g", w);
  }
  return buf;
}

struct RunInfo {
  std::string run_id, family, source, target, strategy;
  int rank = 0;
  std::uint64_t seed = 0;
};

// Appends the cadence rows of one run to runs.csv and metrics_long.csv.
class Sink {
 public:
  Sink(const fs::path& dir, std::string hash, bool quiet) : hash_(std::move(hash)), quiet_(quiet) {
    fs::create_directories(dir);
    runs_.open(dir / "runs.csv");
    long_.open(dir / "metrics_long.csv");
    if (!runs_ || !long_) throw Error("cannot write into " + dir.string());
    runs_ << kRunsHeader << '\n';
    long_ << "run_id,seed,epoch,metric,value,config_hash,build_id\n";
  }

  void add(const RunInfo& info, const TrainResult& res) {
    for (const auto& log : res.evaluations) {
      RunRow r;
      r.run_id = info.run_id;
      r.family = info.family;
      r.source = info.source;
      r.target = info.target;
      r.strategy = info.strategy;
      r.rank = info.rank;
      r.seed = info.seed;
      r.epoch = log.epoch;
      r.loss = log.loss;
      r.rel_l2 = log.eval->rel_l2;
      r.rel_h1 = log.eval->rel_h1;
      r.trainable_params = res.trainable_params;
      r.tape_nodes = res.tape.nodes_touched_by_trainables;
      r.seconds_per_1k_epochs = res.seconds_per_1k_epochs;
      r.config_hash = hash_;
      runs_ << format_row(r) << '\n';
      auto metric = [&](const std::string& name, double v) {
        long_ << info.run_id << ',' << info.seed << ',' << log.epoch << ',' << name << ',' << num(v) << ','
              << hash_ << ',' << build_id() << '\n';
      };
      for (const auto& [name, v] : log.components) metric("loss_" + name, v);
      for (const auto& [name, v] : log.eval->extra) metric(name, v);
    }
    runs_.flush();
    long_.flush();
    if (!quiet_) {
      const auto& f = res.final_eval;
      std::printf("%-40s rel_l2 %.6e rel_h1 %.6e trainable %zu  %.2f s/1k\n", info.run_id.c_str(), f.rel_l2,
                  f.rel_h1, res.trainable_params, res.seconds_per_1k_epochs);
      std::fflush(stdout);
    }
  }

 private:
  std::string hash_;
  bool quiet_;
  std::ofstream runs_, long_;
};

fs::path out_dir(const ExperimentConfig& cfg, const Options& opt) {
  return opt.out_dir.empty() ? fs::path(cfg.output_dir) : fs::path(opt.out_dir);
}

std::vector<std::uint64_t> seeds_of(const ExperimentConfig& cfg, const Options& opt) {
  return opt.seeds.empty() ? cfg.seeds : opt.seeds;
}

AdamConfig adam_of(const ExperimentConfig& cfg) { return cfg.adam; }

void write_fields(const Problem& p, const Network& net, const fs::path& path) {
  if (const auto* b = dynamic_cast<const elasticity::BeamProblem*>(&p)) b->write_fields(net, path.string());
  if (const auto* q = dynamic_cast<const elasticity::PlateProblem*>(&p)) q->write_fields(net, path.string());
}

void maybe_plot(const fs::path& dir, const ExperimentConfig& cfg, const Options& opt) {
  if (!(cfg.plots || opt.plots)) return;
  plot_runs_svg(dir / "runs.csv", dir / "rel_l2.svg", "rel_l2");
  plot_runs_svg(dir / "runs.csv", dir / "rel_h1.svg", "rel_h1");
}

void write_config_copy(const fs::path& dir, const ExperimentConfig& cfg) {
  fs::create_directories(dir);
  std::ofstream(dir / "config.json") << serialize_config(cfg);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::string short_label(const ProblemConfig& p) {
  switch (p.family) {
    case Family::TaylorGreen: return pi_multiple(p.tg.w);
    case Family::Beam: return p.beam.porosity == elasticity::Porosity::Symmetric ? "sym" : "asym";
    case Family::Plate: return elasticity::hole_name(p.plate.hole);
  }
  return "?";
}

std::string format_row(const RunRow& r) {
  std::ostringstream os;
  os << r.run_id << ',' << r.family << ',' << r.source << ',' << r.target << ',' << r.strategy << ','
     << r.rank << ',' << r.seed << ',' << r.epoch << ',' << num(r.loss) << ',' << num(r.rel_l2) << ','
     << num(r.rel_h1) << ',' << r.trainable_params << ',' << r.tape_nodes << ','
     << num(r.seconds_per_1k_epochs) << ',' << r.config_hash << ',' << build_id();
  return os.str();
}

void plot_runs_svg(const fs::path& runs_csv, const fs::path& svg, const std::string& column) {
  std::ifstream in(runs_csv);
  if (!in) throw Error("cannot read " + runs_csv.string());
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  auto col = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error("column '" + name + "' not in " + runs_csv.string());
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t ci = col("run_id"), ce = col("epoch"), cv = col(column);
  std::map<std::string, std::vector<std::pair<double, double>>> series;
  std::vector<std::string> order;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != header.size()) continue;
    const double v = std::stod(cells[cv]);
    if (!(v > 0.0) || !std::isfinite(v)) continue;
    if (!series.count(cells[ci])) order.push_back(cells[ci]);
    series[cells[ci]].emplace_back(std::stod(cells[ce]), v);
  }

  double xmax = 1.0, lo = 1e300, hi = -1e300;
  for (const auto& [id, pts] : series) {
    for (const auto& [x, y] : pts) {
      xmax = std::max(xmax, x);
      lo = std::min(lo, std::log10(y));
      hi = std::max(hi, std::log10(y));
    }
  }
  if (lo > hi) lo = -1.0, hi = 0.0;
  lo = std::floor(lo), hi = std::ceil(hi);
  if (hi == lo) hi = lo + 1.0;

  constexpr double W = 720, H = 440, ml = 70, mr = 190, mt = 20, mb = 50;
  const double pw = W - ml - mr, ph = H - mt - mb;
  auto px = [&](double x) { return ml + pw * x / xmax; };
  auto py = [&](double y) { return mt + ph * (hi - std::log10(y)) / (hi - lo); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                 "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

  std::ofstream out(svg);
  if (!out) throw Error("cannot write " + svg.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double d = lo; d <= hi; d += 1.0) {
    const double y = py(std::pow(10.0, d));
    out << "<line x1=\"" << ml << "\" x2=\"" << ml + pw << "\" y1=\"" << y << "\" y2=\"" << y
        << "\" stroke=\"#ddd\"/><text x=\"" << ml - 6 << "\" y=\"" << y + 4
        << "\" text-anchor=\"end\">1e" << d << "</text>\n";
  }
  for (int k = 0; k <= 4; ++k) {
    const double x = xmax * k / 4.0;
    out << "<text x=\"" << px(x) << "\" y=\"" << mt + ph + 16 << "\" text-anchor=\"middle\">" << x
        << "</text>\n";
  }
  out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">epoch</text>\n";
  out << "<text x=\"16\" y=\"" << mt + ph / 2 << "\" transform=\"rotate(-90 16 " << mt + ph / 2
      << ")\" text-anchor=\"middle\">" << column << "</text>\n";
  std::size_t k = 0;
  for (const auto& id : order) {
    const char* c = colors[k % 10];
    out << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : series[id]) out << px(x) << ',' << py(y) << ' ';
    out << "\"/>\n";
    const double ly = mt + 14 + 16.0 * static_cast<double>(k);
    out << "<line x1=\"" << ml + pw + 10 << "\" x2=\"" << ml + pw + 30 << "\" y1=\"" << ly - 4 << "\" y2=\""
        << ly - 4 << "\" stroke=\"" << c << "\" stroke-width=\"2\"/><text x=\"" << ml + pw + 34 << "\" y=\""
        << ly << "\">" << id << "</text>\n";
    ++k;
  }
  out << "</svg>\n";
}

int cmd_train(const ExperimentConfig& cfg, const Options& opt) {
  const fs::path dir = out_dir(cfg, opt);
  const std::string hash = config_hash(cfg);
  write_config_copy(dir, cfg);
  auto problem = cfg.problem->make();
  Sink sink(dir, hash, opt.quiet);
  for (std::uint64_t seed : seeds_of(cfg, opt)) {
    Network net = Network::build(problem->default_layer_sizes(), seed);
    TrainOptions to;
    to.epochs = cfg.epochs;
    to.eval_every = cfg.eval_every;
    to.adam = adam_of(cfg);
    const TrainResult res = train(net, *problem, to);
    RunInfo info;
    info.run_id = std::string(family_name(problem->family())) + "-" + short_label(*cfg.problem) + "-s" +
                  std::to_string(seed);
    info.family = family_name(problem->family());
    info.source = "-";
    info.target = short_label(*cfg.problem);
    info.strategy = "none";
    info.seed = seed;
    sink.add(info, res);
    save_checkpoint(net, {seed, static_cast<std::uint64_t>(cfg.epochs), problem->tag()},
                    dir / (info.run_id + ".ckpt"));
    write_fields(*problem, net, dir / (info.run_id + "_fields.csv"));
  }
  maybe_plot(dir, cfg, opt);
  return 0;
}

int cmd_transfer(const ExperimentConfig& cfg, const Options& opt) {
  const fs::path dir = out_dir(cfg, opt);
  const std::string hash = config_hash(cfg);
  write_config_copy(dir, cfg);
  auto source = cfg.source->make();
  auto target = cfg.target->make();
  if (source->family() != target->family()) throw TransferError("source and target families differ");
  std::vector<transfer::Strategy> strategies;
  for (const auto& s : cfg.strategies) strategies.push_back(transfer::parse_strategy(s));
  transfer::Budget budget;
  budget.source_epochs = cfg.source_epochs;
  budget.target_epochs = cfg.target_epochs;
  budget.eval_every = cfg.eval_every;
  budget.tail_window = cfg.tail_window;
  budget.adam = adam_of(cfg);
  const auto cache = transfer::cache_dir_from_env();

  Sink sink(dir, hash, opt.quiet);
  std::ofstream summary(dir / "summary.csv");
  summary << "strategy,rank,seed,trainable_params,seconds_per_1k_epochs,final_rel_l2,final_rel_h1,"
             "tail_rel_l2,config_hash,build_id\n";
  for (std::uint64_t seed : seeds_of(cfg, opt)) {
    std::optional<transfer::SourceRun> src;
    for (const auto& st : strategies) {
      if (st.kind != transfer::Kind::None && !src) src = transfer::train_source(*source, budget, seed, cache);
      const Network& start =
          src ? src->net : Network::build(target->default_layer_sizes(), seed);
      const transfer::TransferResult r = transfer::fine_tune(start, *target, st, budget, seed);
      RunInfo info;
      info.family = family_name(target->family());
      info.source = short_label(*cfg.source);
      info.target = short_label(*cfg.target);
      info.strategy = st.name();
      info.rank = st.kind == transfer::Kind::Lora ? st.rank : 0;
      info.seed = seed;
      info.run_id = info.family + "-" + info.source + "-to-" + info.target + "-" + st.tag() + "-s" +
                    std::to_string(seed);
      sink.add(info, r.run);
      summary << st.name() << ',' << info.rank << ',' << seed << ',' << r.run.trainable_params << ','
              << num(r.run.seconds_per_1k_epochs) << ',' << num(r.run.final_eval.rel_l2) << ','
              << num(r.run.final_eval.rel_h1) << ',' << num(transfer::tail_error(r.run, cfg.tail_window)) << ',' << hash << ','
              << build_id() << '\n';
      summary.flush();
    }
  }
  maybe_plot(dir, cfg, opt);
  return 0;
}

int cmd_sweep(const ExperimentConfig& cfg, const Options& opt) {
  const fs::path dir = out_dir(cfg, opt);
  const std::string hash = config_hash(cfg);
  write_config_copy(dir, cfg);
  auto source = cfg.source->make();
  auto target = cfg.target->make();
  transfer::Budget budget;
  budget.source_epochs = cfg.source_epochs;
  budget.target_epochs = cfg.target_epochs;
  budget.eval_every = cfg.eval_every;
  budget.tail_window = cfg.tail_window;
  budget.adam = adam_of(cfg);
  std::map<int, std::vector<double>> by_rank;
  std::ofstream out(dir / "sweep.csv");
  out << "rank,seed,tail_rel_l2,final_rel_l2,trainable_params,seconds_per_1k_epochs,config_hash,build_id\n";
  for (std::uint64_t seed : seeds_of(cfg, opt)) {
    const auto rows = transfer::rank_sweep(*source, *target, cfg.ranks, budget, seed, cfg.lora_alpha,
                                           transfer::cache_dir_from_env());
    for (const auto& r : rows) {
      out << r.rank << ',' << seed << ',' << num(r.error) << ',' << num(r.final_rel_l2) << ','
          << r.trainable_params << ',' << num(r.seconds_per_1k_epochs) << ',' << hash << ',' << build_id()
          << '\n';
      by_rank[r.rank].push_back(r.error);
      if (!opt.quiet) std::printf("rank %3d seed %llu tail rel_l2 %.6e\n", r.rank, static_cast<unsigned long long>(seed), r.error);
    }
    out.flush();
  }
  std::ofstream med(dir / "sweep_summary.csv");
  med << "rank,median_tail_rel_l2,best,config_hash,build_id\n";
  int best = 0;
  double best_err = 1e300;
  for (const auto& [rank, errs] : by_rank) {
    const double m = median(errs);
    if (m < best_err) best_err = m, best = rank;
  }
  for (const auto& [rank, errs] : by_rank) med << rank << ',' << num(median(errs)) << ',' << (rank == best) << ',' << hash << ',' << build_id() << '\n';
  if (!opt.quiet) std::printf("best rank %d (median tail rel_l2 %.6e)\n", best, best_err);
  return 0;
}

int cmd_chain(const ExperimentConfig& cfg, const Options& opt) {
  const fs::path dir = out_dir(cfg, opt);
  const std::string hash = config_hash(cfg);
  write_config_copy(dir, cfg);
  if (cfg.chain.size() != cfg.chain_budgets.size()) {
    throw ConfigError("'chain_budgets' needs one entry per chain problem", "chain_budgets");
  }
  if (cfg.strategies.size() != 1) throw ConfigError("chain takes exactly one strategy", "strategies");
  const auto strategy = transfer::parse_strategy(cfg.strategies.front());
  std::vector<std::unique_ptr<Problem>> owned;
  std::vector<const Problem*> problems;
  for (const auto& p : cfg.chain) {
    owned.push_back(p.make());
    problems.push_back(owned.back().get());
  }
  int total = 0;
  for (int b : cfg.chain_budgets) total += b;
  Sink sink(dir, hash, opt.quiet);
  std::ofstream summary(dir / "chain_summary.csv");
  summary << "seed,chained_final_rel_l2,baseline_final_rel_l2,total_epochs,config_hash,build_id\n";
  for (std::uint64_t seed : seeds_of(cfg, opt)) {
    const auto chain = transfer::chain_run(problems, cfg.chain_budgets, total, strategy, seed, cfg.eval_every,
                                           adam_of(cfg));
    for (std::size_t s = 0; s < chain.stages.size(); ++s) {
      RunInfo info;
      info.family = family_name(problems[s]->family());
      info.source = s == 0 ? "-" : short_label(cfg.chain[s - 1]);
      info.target = short_label(cfg.chain[s]);
      info.strategy = s == 0 ? "none" : strategy.name();
      info.rank = strategy.kind == transfer::Kind::Lora && s > 0 ? strategy.rank : 0;
      info.seed = seed;
      info.run_id = "chain-stage" + std::to_string(s) + "-" + info.target + "-s" + std::to_string(seed);
      sink.add(info, chain.stages[s]);
    }
    Network base = Network::build(problems.back()->default_layer_sizes(), seed);
    TrainOptions to;
    to.epochs = total;
    to.eval_every = cfg.eval_every;
    to.adam = adam_of(cfg);
    const TrainResult baseline = train(base, *problems.back(), to);
    RunInfo info;
    info.family = family_name(problems.back()->family());
    info.source = "-";
    info.target = short_label(cfg.chain.back());
    info.strategy = "none";
    info.seed = seed;
    info.run_id = "chain-baseline-" + info.target + "-s" + std::to_string(seed);
    sink.add(info, baseline);
    summary << seed << ',' << num(chain.stages.back().final_eval.rel_l2) << ','
            << num(baseline.final_eval.rel_l2) << ',' << total << ',' << hash << ',' << build_id() << '\n';
  }
  maybe_plot(dir, cfg, opt);
  return 0;
}

int cmd_eval(const ExperimentConfig& cfg, const Options& opt) {
  const fs::path dir = out_dir(cfg, opt);
  auto problem = cfg.problem->make();
  CheckpointMeta meta;
  Network net = load_checkpoint(cfg.checkpoint, &meta);
  const Evaluation e = problem->evaluate(net);
  fs::create_directories(dir);
  std::ofstream out(dir / "eval.csv");
  out << "checkpoint,seed,epoch,metric,value,config_hash,build_id\n";
  const std::string hash = config_hash(cfg);
  auto row = [&](const std::string& name, double v) {
    out << cfg.checkpoint << ',' << meta.seed << ',' << meta.epoch << ',' << name << ',' << num(v) << ','
        << hash << ',' << build_id() << '\n';
    if (!opt.quiet) std::printf("%-18s %.17g\n", name.c_str(), v);
  };
  row("rel_l2", e.rel_l2);
  row("rel_h1", e.rel_h1);
  for (const auto& [name, v] : e.extra) row(name, v);
  return 0;
}

int cmd_oracle(const ExperimentConfig& cfg, const Options& opt) {
  if (cfg.problem->family != Family::Beam) throw ConfigError("oracle needs a beam problem", "problem.family");
  const fs::path dir = out_dir(cfg, opt);
  fs::create_directories(dir);
  const int divisor = opt.full_grid ? 1 : cfg.problem->beam.grid_divisor;
  const auto sol = oracle::solve_beam_fd(cfg.problem->beam, divisor);
  oracle::write_field_csv((dir / "oracle_fields.csv").string(), sol.grid.points, sol.ux, sol.uy, sol.mises);
  if (!opt.quiet) {
    std::printf("grid %d x %d, %d CG iterations, relative residual %.3e, max |u_y| %.9g, max Mises %.9g\n",
                sol.grid.nx, sol.grid.ny, sol.iterations, sol.residual, sol.uy.abs().maxCoeff(),
                sol.mises.maxCoeff());
  }
  return 0;
}

int run_command(const std::string& command, const std::string& config_path, const Options& opt) {
  try {
    const ExperimentConfig cfg = load_config(config_path);
    require_for(command, cfg);
    if (command == "train") return cmd_train(cfg, opt);
    if (command == "transfer") return cmd_transfer(cfg, opt);
    if (command == "sweep") return cmd_sweep(cfg, opt);
    if (command == "chain") return cmd_chain(cfg, opt);
    if (command == "eval") return cmd_eval(cfg, opt);
    if (command == "oracle") return cmd_oracle(cfg, opt);
    throw ConfigError("unknown command '" + command + "'", "<command>");
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error [%s]: %s\n", e.key().c_str(), e.what());
    return 2;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "aborted: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace pinntl::harness
