#include "pinntl/harness/config.hpp"

#include <json.hpp>

#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "pinntl/elasticity/problems.hpp"
#include "pinntl/errors.hpp"
#include "pinntl/util/hash.hpp"

namespace pinntl::harness {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Strict view of a JSON object: every key must be consumed by a `get` call
// before `finish`, otherwise the leftover key is reported.
class Obj {
 public:
  Obj(const json& j, std::string path, std::vector<std::string>& present)
      : j_(j), path_(std::move(path)), present_(present) {
    if (!j_.is_object()) throw ConfigError("'" + where() + "' must be a table", where());
  }

  template <class T>
  bool get(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return false;
    present_.push_back(join(path_, key));
    read(*it, join(path_, key), out);
    return true;
  }

  const json* sub(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    present_.push_back(join(path_, key));
    return &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) {
        throw ConfigError("unknown key '" + join(path_, it.key()) + "'", join(path_, it.key()));
      }
    }
  }

  std::string path(const std::string& key) const { return join(path_, key); }

 private:
  std::string where() const { return path_.empty() ? "<root>" : path_; }

  static void read(const json& v, const std::string& k, int& out) {
    if (!v.is_number_integer()) throw ConfigError("'" + k + "' must be an integer", k);
    out = v.get<int>();
  }
  static void read(const json& v, const std::string& k, std::uint64_t& out) {
    if (!v.is_number_unsigned()) throw ConfigError("'" + k + "' must be a non-negative integer", k);
    out = v.get<std::uint64_t>();
  }
  static void read(const json& v, const std::string& k, double& out) {
    if (!v.is_number()) throw ConfigError("'" + k + "' must be a number", k);
    out = v.get<double>();
  }
  static void read(const json& v, const std::string& k, bool& out) {
    if (!v.is_boolean()) throw ConfigError("'" + k + "' must be true or false", k);
    out = v.get<bool>();
  }
  static void read(const json& v, const std::string& k, std::string& out) {
    if (!v.is_string()) throw ConfigError("'" + k + "' must be a string", k);
    out = v.get<std::string>();
  }
  template <class T>
  static void read(const json& v, const std::string& k, std::vector<T>& out) {
    if (!v.is_array()) throw ConfigError("'" + k + "' must be a list", k);
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      T item{};
      read(v[i], k + "[" + std::to_string(i) + "]", item);
      out.push_back(item);
    }
  }

  const json& j_;
  std::string path_;
  std::vector<std::string>& present_;
  std::set<std::string> seen_;
};

Family parse_family(const std::string& s, const std::string& key) {
  if (s == "taylor_green") return Family::TaylorGreen;
  if (s == "beam") return Family::Beam;
  if (s == "plate") return Family::Plate;
  throw ConfigError("'" + key + "' must be taylor_green, beam or plate", key);
}

ProblemConfig parse_problem(const json& j, const std::string& path, std::vector<std::string>& present) {
  Obj o(j, path, present);
  ProblemConfig p;
  std::string fam;
  if (!o.get("family", fam)) throw ConfigError("missing required key '" + o.path("family") + "'", o.path("family"));
  p.family = parse_family(fam, o.path("family"));
  switch (p.family) {
    case Family::TaylorGreen: {
      if (!o.get("w_multiplier", p.w_multiplier)) {
        throw ConfigError("missing required key '" + o.path("w_multiplier") + "'", o.path("w_multiplier"));
      }
      if (!(p.w_multiplier > 0.0)) {
        throw ConfigError("'" + o.path("w_multiplier") + "' must be positive", o.path("w_multiplier"));
      }
      p.tg.w = p.w_multiplier * std::numbers::pi;
      o.get("re", p.tg.re);
      o.get("interior", p.counts.interior);
      int nb = p.counts.b_psi, ni = p.counts.i_psi;
      o.get("boundary", nb);
      o.get("initial", ni);
      p.counts.b_psi = p.counts.b_omega = p.counts.b_u = p.counts.b_v = nb;
      p.counts.i_psi = p.counts.i_omega = p.counts.i_u = p.counts.i_v = ni;
      o.get("collocation_seed", p.collocation_seed);
      break;
    }
    case Family::Beam: {
      std::string por;
      if (!o.get("porosity", por)) {
        throw ConfigError("missing required key '" + o.path("porosity") + "'", o.path("porosity"));
      }
      if (por == "symmetric") p.beam.porosity = elasticity::Porosity::Symmetric;
      else if (por == "asymmetric") p.beam.porosity = elasticity::Porosity::Asymmetric;
      else throw ConfigError("'" + o.path("porosity") + "' must be symmetric or asymmetric", o.path("porosity"));
      o.get("grid_divisor", p.beam.grid_divisor);
      o.get("e_max", p.beam.e_max);
      o.get("e_min", p.beam.e_min);
      o.get("nu", p.beam.nu);
      o.get("load", p.beam.f);
      o.get("length", p.beam.L);
      o.get("height", p.beam.H);
      break;
    }
    case Family::Plate: {
      std::string hole;
      if (!o.get("hole", hole)) throw ConfigError("missing required key '" + o.path("hole") + "'", o.path("hole"));
      if (hole == "circle") p.plate.hole = elasticity::Hole::Circle;
      else if (hole == "ellipse") p.plate.hole = elasticity::Hole::Ellipse;
      else throw ConfigError("'" + o.path("hole") + "' must be circle or ellipse", o.path("hole"));
      o.get("mesh_points", p.plate.mesh_points);
      o.get("E", p.plate.E);
      o.get("nu", p.plate.nu);
      o.get("traction", p.plate.traction);
      o.get("side", p.plate.L);
      o.get("radius", p.plate.r);
      o.get("semi_x", p.plate.a);
      o.get("semi_y", p.plate.b);
      break;
    }
  }
  o.finish();
  return p;
}

json problem_json(const ProblemConfig& p) {
  json j;
  j["family"] = family_name(p.family);
  switch (p.family) {
    case Family::TaylorGreen:
      j["w_multiplier"] = p.w_multiplier;
      j["re"] = p.tg.re;
      j["interior"] = p.counts.interior;
      j["boundary"] = p.counts.b_psi;
      j["initial"] = p.counts.i_psi;
      j["collocation_seed"] = p.collocation_seed;
      break;
    case Family::Beam:
      j["porosity"] = elasticity::porosity_name(p.beam.porosity);
      j["grid_divisor"] = p.beam.grid_divisor;
      j["e_max"] = p.beam.e_max;
      j["e_min"] = p.beam.e_min;
      j["nu"] = p.beam.nu;
      j["load"] = p.beam.f;
      j["length"] = p.beam.L;
      j["height"] = p.beam.H;
      break;
    case Family::Plate:
      j["hole"] = elasticity::hole_name(p.plate.hole);
      j["mesh_points"] = p.plate.mesh_points;
      j["E"] = p.plate.E;
      j["nu"] = p.plate.nu;
      j["traction"] = p.plate.traction;
      j["side"] = p.plate.L;
      j["radius"] = p.plate.r;
      j["semi_x"] = p.plate.a;
      j["semi_y"] = p.plate.b;
      break;
  }
  return j;
}

bool has(const ExperimentConfig& c, const std::string& key) {
  for (const auto& k : c.present) {
    if (k == key) return true;
  }
  return false;
}

}  // namespace

std::unique_ptr<Problem> ProblemConfig::make() const {
  switch (family) {
    case Family::TaylorGreen: return std::make_unique<tg::TaylorGreenProblem>(tg, counts, collocation_seed);
    case Family::Beam: return std::make_unique<elasticity::BeamProblem>(beam);
    case Family::Plate: return std::make_unique<elasticity::PlateProblem>(plate);
  }
  throw ConfigError("unknown problem family", "family");
}

bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
  return problem == o.problem && source == o.source && target == o.target && chain == o.chain &&
         chain_budgets == o.chain_budgets && strategies == o.strategies && ranks == o.ranks &&
         lora_alpha == o.lora_alpha && epochs == o.epochs && source_epochs == o.source_epochs &&
         target_epochs == o.target_epochs && eval_every == o.eval_every && tail_window == o.tail_window && adam.lr == o.adam.lr &&
         adam.beta1 == o.adam.beta1 && adam.beta2 == o.adam.beta2 && adam.eps == o.adam.eps &&
         seeds == o.seeds && output_dir == o.output_dir && plots == o.plots && checkpoint == o.checkpoint;
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what(), "<syntax>");
  }
  ExperimentConfig c;
  Obj o(j, "", c.present);
  if (const json* p = o.sub("problem")) c.problem = parse_problem(*p, "problem", c.present);
  if (const json* p = o.sub("source")) c.source = parse_problem(*p, "source", c.present);
  if (const json* p = o.sub("target")) c.target = parse_problem(*p, "target", c.present);
  if (const json* p = o.sub("chain")) {
    if (!p->is_array()) throw ConfigError("'chain' must be a list of problems", "chain");
    for (std::size_t i = 0; i < p->size(); ++i) {
      c.chain.push_back(parse_problem((*p)[i], "chain[" + std::to_string(i) + "]", c.present));
    }
  }
  o.get("chain_budgets", c.chain_budgets);
  o.get("strategies", c.strategies);
  o.get("ranks", c.ranks);
  o.get("lora_alpha", c.lora_alpha);
  o.get("epochs", c.epochs);
  o.get("source_epochs", c.source_epochs);
  o.get("target_epochs", c.target_epochs);
  o.get("eval_every", c.eval_every);
  o.get("tail_window", c.tail_window);
  o.get("lr", c.adam.lr);
  o.get("beta1", c.adam.beta1);
  o.get("beta2", c.adam.beta2);
  o.get("eps", c.adam.eps);
  o.get("seeds", c.seeds);
  o.get("output_dir", c.output_dir);
  o.get("plots", c.plots);
  o.get("checkpoint", c.checkpoint);
  o.finish();
  if (c.seeds.empty()) throw ConfigError("'seeds' must not be empty", "seeds");
  if (!(c.adam.lr > 0.0)) throw ConfigError("'lr' must be positive", "lr");
  if (c.eval_every < 1) throw ConfigError("'eval_every' must be positive", "eval_every");
  if (c.tail_window < 1) throw ConfigError("'tail_window' must be positive", "tail_window");
  const std::pair<const char*, int> budgets[] = {
      {"epochs", c.epochs}, {"source_epochs", c.source_epochs}, {"target_epochs", c.target_epochs}};
  for (const auto& [k, v] : budgets) {
    if (v < 0) throw ConfigError(std::string("'") + k + "' must be non-negative", k);
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path, "<file>");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  json j;
  if (c.problem) j["problem"] = problem_json(*c.problem);
  if (c.source) j["source"] = problem_json(*c.source);
  if (c.target) j["target"] = problem_json(*c.target);
  if (!c.chain.empty()) {
    j["chain"] = json::array();
    for (const auto& p : c.chain) j["chain"].push_back(problem_json(p));
  }
  j["chain_budgets"] = c.chain_budgets;
  j["strategies"] = c.strategies;
  j["ranks"] = c.ranks;
  j["lora_alpha"] = c.lora_alpha;
  j["epochs"] = c.epochs;
  j["source_epochs"] = c.source_epochs;
  j["target_epochs"] = c.target_epochs;
  j["eval_every"] = c.eval_every;
  j["tail_window"] = c.tail_window;
  j["lr"] = c.adam.lr;
  j["beta1"] = c.adam.beta1;
  j["beta2"] = c.adam.beta2;
  j["eps"] = c.adam.eps;
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir;
  j["plots"] = c.plots;
  j["checkpoint"] = c.checkpoint;
  return j.dump(2) + "\n";
}

std::string config_hash(const ExperimentConfig& cfg) { return hex64(fnv1a64(serialize_config(cfg))); }

void require_for(const std::string& command, const ExperimentConfig& c) {
  std::vector<std::string> keys;
  if (command == "train") keys = {"problem", "epochs"};
  else if (command == "transfer") keys = {"source", "target", "source_epochs", "target_epochs", "strategies"};
  else if (command == "sweep") keys = {"source", "target", "source_epochs", "target_epochs", "ranks"};
  else if (command == "chain") keys = {"chain", "chain_budgets", "strategies"};
  else if (command == "eval") keys = {"problem", "checkpoint"};
  else if (command == "oracle") keys = {"problem"};
  else throw ConfigError("unknown command '" + command + "'", "<command>");
  for (const auto& k : keys) {
    if (!has(c, k)) throw ConfigError("missing required key '" + k + "' for " + command, k);
  }
}

}  // namespace pinntl::harness
