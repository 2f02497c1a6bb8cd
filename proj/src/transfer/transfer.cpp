#include "pinntl/transfer/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <sstream>
#include <system_error>

#include <unistd.h>

#include "pinntl/errors.hpp"
#include "pinntl/network/checkpoint.hpp"
#include "pinntl/util/hash.hpp"

namespace pinntl::transfer {

namespace {

constexpr std::uint64_t kLoraSalt = 0x4c6f5241;  // adapter draws

std::string sizes_text(const std::vector<int>& sizes) {
  std::string s;
  for (std::size_t i = 0; i < sizes.size(); ++i) s += (i ? "," : "") + std::to_string(sizes[i]);
  return s;
}

}  // namespace

std::string Strategy::name() const {
  switch (kind) {
    case Kind::None: return "none";
    case Kind::Full: return "full";
    case Kind::Light: return "light";
    case Kind::Lora: return "lora";
  }
  return "?";
}

std::string Strategy::tag() const {
  if (kind != Kind::Lora) return name();
  std::string t = "lora_r" + std::to_string(rank);
  if (alpha != 1.0) {
    std::ostringstream os;
    os.precision(17);
    os << "_a" << alpha;
    t += os.str();
  }
  return t;
}

Strategy parse_strategy(const std::string& text) {
  if (text == "none") return Strategy::none();
  if (text == "full") return Strategy::full();
  if (text == "light") return Strategy::light();
  if (text.rfind("lora:", 0) == 0) {
    const std::string rest = text.substr(5);
    const auto colon = rest.find(':');
    try {
      std::size_t used = 0;
      const std::string rs = rest.substr(0, colon);
      const int r = std::stoi(rs, &used);
      if (used != rs.size()) throw std::invalid_argument(rs);
      double alpha = 1.0;
      if (colon != std::string::npos) {
        const std::string as = rest.substr(colon + 1);
        alpha = std::stod(as, &used);
        if (used != as.size()) throw std::invalid_argument(as);
      }
      if (r < 1) throw RankError("LoRA rank must be at least 1");
      return Strategy::lora(r, alpha);
    } catch (const std::logic_error&) {
      throw ConfigError("bad LoRA strategy '" + text + "'", "strategy");
    }
  }
  throw ConfigError("unknown strategy '" + text + "' (none, full, light, lora:<r>)", "strategy");
}

Network merged(const Network& net) {
  if (!net.lora()) {
    Network copy = net;
    copy.set_all_trainable(true);
    return copy;
  }
  const auto w = net.effective_weights();
  std::vector<Parameter> base;
  for (int l = 0; l < net.num_layers(); ++l) {
    Parameter pw = net.weight(l);
    pw.value = w[static_cast<std::size_t>(l)];
    base.push_back(std::move(pw));
    base.push_back(net.bias(l));
  }
  Network out = Network::from_parts(net.layer_sizes(), std::move(base), std::nullopt);
  out.set_all_trainable(true);
  return out;
}

Network apply_strategy(const Network& source, const std::vector<int>& target_sizes,
                       const Strategy& strategy, std::uint64_t seed) {
  if (strategy.kind == Kind::None) return Network::build(target_sizes, seed);
  if (source.layer_sizes() != target_sizes) {
    throw TransferError("source architecture [" + sizes_text(source.layer_sizes()) +
                        "] does not match target [" + sizes_text(target_sizes) + "]");
  }
  Network net = merged(source);
  switch (strategy.kind) {
    case Kind::Full: break;
    case Kind::Light: net.freeze_except_last(); break;
    case Kind::Lora: {
      LoraConfig cfg;
      cfg.rank = strategy.rank;
      cfg.alpha = strategy.alpha;
      net.attach_lora(cfg, mix_seed(seed, kLoraSalt));
      break;
    }
    case Kind::None: break;
  }
  return net;
}

std::optional<std::filesystem::path> cache_dir_from_env() {
  const char* dir = std::getenv("PINNTL_CACHE_DIR");
  if (dir == nullptr || *dir == '\0') return std::nullopt;
  return std::filesystem::path(dir);
}

std::string source_cache_key(const Problem& source, std::uint64_t seed, int epochs,
                             const AdamConfig& adam) {
  std::ostringstream os;
  os.precision(17);
  os << "v" << kCheckpointVersion << '|' << source.tag() << '|' << sizes_text(source.default_layer_sizes())
     << '|' << seed << '|' << epochs << '|' << adam.lr << ',' << adam.beta1 << ',' << adam.beta2 << ','
     << adam.eps;
  return hex64(fnv1a64(os.str()));
}

SourceRun train_source(const Problem& source, const Budget& budget, std::uint64_t seed,
                       const std::optional<std::filesystem::path>& cache_dir) {
  std::filesystem::path file;
  if (cache_dir) {
    file = *cache_dir / ("source-" + source_cache_key(source, seed, budget.source_epochs, budget.adam) + ".ckpt");
    std::error_code ec;
    if (std::filesystem::exists(file, ec)) {
      try {
        CheckpointMeta meta;
        Network net = load_checkpoint(file, &meta);
        if (meta.problem_tag == source.tag() && meta.seed == seed &&
            meta.epoch == static_cast<std::uint64_t>(budget.source_epochs)) {
          return {std::move(net), true, std::nullopt};
        }
      } catch (const LoadError&) {
        // Unreadable entry: retrain and overwrite it.
      }
    }
  }
  Network net = Network::build(source.default_layer_sizes(), seed);
  TrainOptions opt;
  opt.epochs = budget.source_epochs;
  opt.eval_every = budget.eval_every;
  opt.adam = budget.adam;
  TrainResult res = train(net, source, opt);
  if (cache_dir) {
    std::filesystem::create_directories(*cache_dir);
    // Write then rename so concurrent sweeps never read a partial file.
    const auto tmp = file.string() + ".tmp" + std::to_string(::getpid());
    save_checkpoint(net, {seed, static_cast<std::uint64_t>(budget.source_epochs), source.tag()}, tmp);
    std::filesystem::rename(tmp, file);
  }
  return {std::move(net), false, std::move(res)};
}

TransferResult fine_tune(const Network& source, const Problem& target, const Strategy& strategy,
                         const Budget& budget, std::uint64_t seed, const EpochCallback& on_epoch) {
  Network net = apply_strategy(source, target.default_layer_sizes(), strategy, seed);
  TrainOptions opt;
  opt.epochs = budget.target_epochs;
  opt.eval_every = budget.eval_every;
  opt.adam = budget.adam;
  TrainResult run = train(net, target, opt, on_epoch);
  return {std::move(net), std::move(run), false};
}

TransferResult run_transfer(const Problem& source, const Problem& target, const Strategy& strategy,
                            const Budget& budget, std::uint64_t seed,
                            const std::optional<std::filesystem::path>& cache_dir,
                            const EpochCallback& on_epoch) {
  if (source.family() != target.family()) {
    throw TransferError(std::string("cannot transfer from ") + family_name(source.family()) + " to " +
                        family_name(target.family()));
  }
  if (strategy.kind == Kind::None) {
    // The baseline never looks at the source; skip training it.
    Network fresh = Network::build(target.default_layer_sizes(), seed);
    return fine_tune(fresh, target, strategy, budget, seed, on_epoch);
  }
  SourceRun src = train_source(source, budget, seed, cache_dir);
  TransferResult r = fine_tune(src.net, target, strategy, budget, seed, on_epoch);
  r.source_from_cache = src.from_cache;
  return r;
}

double tail_error(const TrainResult& run, int window) {
  if (run.evaluations.empty()) throw ContractError("run has no evaluations");
  const int last = run.evaluations.back().epoch;
  double sum = 0.0;
  int n = 0;
  for (const auto& e : run.evaluations) {
    if (e.epoch > last - window && e.eval) {
      sum += e.eval->rel_l2;
      ++n;
    }
  }
  return sum / n;
}

std::vector<SweepRow> rank_sweep(const Problem& source, const Problem& target, std::vector<int> ranks,
                                 const Budget& budget, std::uint64_t seed, double alpha,
                                 const std::optional<std::filesystem::path>& cache_dir) {
  if (source.family() != target.family()) throw TransferError("rank sweep needs one problem family");
  for (int r : ranks) {
    if (r < 1 || r > 100) throw RankError("sweep rank " + std::to_string(r) + " outside [1, 100]");
  }
  std::sort(ranks.begin(), ranks.end());
  ranks.erase(std::unique(ranks.begin(), ranks.end()), ranks.end());
  SourceRun src = train_source(source, budget, seed, cache_dir);
  std::vector<SweepRow> rows;
  for (int r : ranks) {
    TransferResult t = fine_tune(src.net, target, Strategy::lora(r, alpha), budget, seed);
    SweepRow row;
    row.rank = r;
    row.error = tail_error(t.run, budget.tail_window);
    row.final_rel_l2 = t.run.final_eval.rel_l2;
    row.trainable_params = t.run.trainable_params;
    row.seconds_per_1k_epochs = t.run.seconds_per_1k_epochs;
    rows.push_back(row);
  }
  return rows;
}

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() == 0 || a.size() != b.size()) {
    throw ShapeError("cosine similarity needs two non-empty vectors of equal length");
  }
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw UndefinedNormError("cosine similarity of a zero vector");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

ChainResult chain_run(const std::vector<const Problem*>& problems, const std::vector<int>& budgets,
                      int total_epochs, const Strategy& strategy, std::uint64_t seed, int eval_every,
                      const AdamConfig& adam, const EpochCallback& on_epoch) {
  if (problems.empty() || problems.size() != budgets.size()) {
    throw ContractError("chain needs one budget per problem");
  }
  if (std::accumulate(budgets.begin(), budgets.end(), 0) != total_epochs) {
    throw ContractError("chain budgets do not sum to the configured total");
  }
  for (const Problem* p : problems) {
    if (p->family() != problems.front()->family()) throw TransferError("chain mixes problem families");
  }
  ChainResult out{Network::build(problems.front()->default_layer_sizes(), seed), {}};
  for (std::size_t s = 0; s < problems.size(); ++s) {
    if (s > 0) {
      out.final_net = apply_strategy(out.final_net, problems[s]->default_layer_sizes(), strategy,
                                     mix_seed(seed, s));
    }
    TrainOptions opt;
    opt.epochs = budgets[s];
    opt.eval_every = eval_every;
    opt.adam = adam;
    out.stages.push_back(train(out.final_net, *problems[s], opt, on_epoch));
  }
  return out;
}

}  // namespace pinntl::transfer
