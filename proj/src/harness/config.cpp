#include <fstream>
#include <set>
#include <sstream>

#include "spur/errors.hpp"
#include "spur/harness.hpp"
#include "spur/parallel.hpp"

namespace spur::harness {

using nlohmann::json;

std::string_view to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kTable1: return "table1";
    case ExperimentKind::kTrajectories: return "trajectories";
    case ExperimentKind::kTheoryCheck: return "theory-check";
    case ExperimentKind::kRates: return "rates";
    case ExperimentKind::kMasksim: return "masksim";
  }
  return "?";
}

ExperimentKind parse_experiment_kind(std::string_view name) {
  for (auto k : {ExperimentKind::kTable1, ExperimentKind::kTrajectories, ExperimentKind::kTheoryCheck,
                 ExperimentKind::kRates, ExperimentKind::kMasksim})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown experiment kind '" + std::string(name) + "'");
}

std::vector<GridCell> ExperimentConfig::cells() const {
  std::vector<GridCell> out;
  for (std::size_t depth : grid.depths)
    for (bool pre : grid.pretrained) {
      if (pre && depth < 2) continue;
      for (std::size_t d2 : grid.d2)
        for (double nu : grid.nu) out.push_back({depth, pre, d2, nu});
    }
  return out;
}

void ExperimentConfig::validate() const {
  if (workers == 0) throw ConfigError("workers must be at least 1");
  try {
    training.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("training: ") + e.what());
  }
  if (pretraining.batch_size == 0 || pretraining.check_interval == 0 || !(pretraining.learning_rate > 0.0) ||
      !(pretraining.tolerance_nats > 0.0))
    throw ConfigError("pretraining settings must be positive");

  switch (kind) {
    case ExperimentKind::kTable1:
    case ExperimentKind::kTrajectories: {
      if (grid.depths.empty() || grid.pretrained.empty() || grid.d2.empty() || grid.nu.empty())
        throw ConfigError("grid lists must be nonempty");
      if (seeds == 0) throw ConfigError("seeds must be at least 1");
      for (std::size_t d : grid.depths)
        if (d < 1 || d > 3) throw ConfigError("depths must lie in {1, 2, 3}");
      if (kind == ExperimentKind::kTrajectories && (grid.depths.size() != 1 || grid.depths[0] != 2))
        throw ConfigError("trajectories are defined for depth 2 only");
      bool only_pre = std::all_of(grid.pretrained.begin(), grid.pretrained.end(), [](bool b) { return b; });
      if (only_pre && std::find(grid.depths.begin(), grid.depths.end(), 1) != grid.depths.end())
        throw ConfigError("pretrained runs require depth >= 2");
      for (std::size_t d2 : grid.d2)
        for (double nu : grid.nu) {
          try {
            ToyConfig(d2, nu);
          } catch (const InvalidArgument& e) {
            throw ConfigError(std::string("grid: ") + e.what());
          }
        }
      break;
    }
    case ExperimentKind::kTheoryCheck:
      if (theory.trials == 0) throw ConfigError("theory trials must be at least 1");
      if (theory.search_draws == 0) throw ConfigError("search draws must be at least 1");
      if (!(theory.concentration > 0.0)) throw ConfigError("concentration must be positive");
      break;
    case ExperimentKind::kRates: {
      try {
        ToyConfig(rates.d2, rates.nu);
      } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("rates: ") + e.what());
      }
      const auto& g = rates.n_grid;
      if (g.size() < 4) throw ConfigError("rates n_grid needs at least 4 points");
      for (std::size_t i = 1; i < g.size(); ++i)
        if (g[i] <= g[i - 1]) throw ConfigError("rates n_grid must be strictly increasing");
      if (g.front() == 0 || static_cast<double>(g.back()) < 100.0 * static_cast<double>(g.front()))
        throw ConfigError("rates n_grid must span at least two decades");
      if (rates.seeds_per_n < 2) throw ConfigError("rates seeds_per_n must be at least 2");
      break;
    }
    case ExperimentKind::kMasksim:
      masksim.seq.validate();
      if (masksim.seeds < 5) throw ConfigError("masksim needs at least 5 seeds");
      if (masksim.policies.empty()) throw ConfigError("masksim policy list is empty");
      break;
  }
}

namespace {

// Reads one JSON object, rejecting keys that are never consumed.
class Section {
 public:
  Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw ConfigError(path_ + " must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : doc_.items())
      if (!used_.count(key)) throw ConfigError("unknown key '" + path_ + "." + key + "'");
  }

  template <typename T>
  void get(const char* key, T& target) {
    used_.insert(key);
    auto it = doc_.find(key);
    if (it == doc_.end()) return;
    try {
      if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
        if (!it->is_number_integer() || it->template get<std::int64_t>() < 0) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::vector<std::size_t>>) {
        if (!it->is_array()) throw ConfigError("");
        for (const auto& e : *it)
          if (!e.is_number_integer() || e.template get<std::int64_t>() < 0) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, double>) {
        if (!it->is_number()) throw ConfigError("");
      }
      target = it->template get<T>();
    } catch (const std::exception&) {
      throw ConfigError("bad value for '" + path_ + "." + key + "'");
    }
  }

  const json* child(const char* key) {
    used_.insert(key);
    auto it = doc_.find(key);
    return it == doc_.end() ? nullptr : &*it;
  }

  const std::string& path() const { return path_; }

 private:
  const json& doc_;
  std::string path_;
  std::set<std::string> used_;
};

void read_training(const json& doc, TrainConfig& t) {
  Section s(doc, "training");
  s.get("learning_rate", t.learning_rate);
  s.get("batch_size", t.batch_size);
  s.get("check_interval", t.check_interval);
  s.get("consecutive_checks", t.consecutive_checks);
  s.get("max_iterations", t.max_iterations);
  s.get("beta1", t.beta1);
  s.get("beta2", t.beta2);
  s.get("epsilon", t.epsilon);
}

void read_pretraining(const json& doc, PretrainConfig& p) {
  Section s(doc, "pretraining");
  s.get("learning_rate", p.learning_rate);
  s.get("batch_size", p.batch_size);
  s.get("tolerance_nats", p.tolerance_nats);
  s.get("check_interval", p.check_interval);
  s.get("max_iterations", p.max_iterations);
}

void read_masksim(const json& doc, MasksimSettings& m) {
  Section s(doc, "masksim");
  SeqConfig& q = m.seq;
  s.get("length", q.length);
  s.get("vocab", q.vocab);
  s.get("nu_s", q.nu_s);
  s.get("mask_rate", q.mask_rate);
  s.get("hidden", q.hidden);
  s.get("pretrain_corpus", q.pretrain_corpus);
  s.get("train_corpus", q.train_corpus);
  s.get("eval_corpus", q.eval_corpus);
  s.get("pretrain_iterations", q.pretrain_iterations);
  s.get("finetune_iterations", q.finetune_iterations);
  s.get("batch_size", q.batch_size);
  s.get("learning_rate", q.learning_rate);
  s.get("unk_at_finetune", q.unk_at_finetune);
  s.get("seeds", m.seeds);
  std::vector<std::string> names;
  s.get("policies", names);
  if (s.child("policies")) {
    m.policies.clear();
    for (const auto& n : names) {
      try {
        m.policies.push_back(parse_mask_policy(n));
      } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
      }
    }
  }
}

}  // namespace

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  c.workers = default_workers();
  if (kind == ExperimentKind::kTrajectories) {
    c.grid = {{2}, {false, true}, {500}, {0.04}};
    c.seeds = 5;
  } else {
    c.grid = {{1, 2}, {false, true}, {50, 100, 500}, {0.04, 0.10, 0.25, 0.50}};
    c.seeds = 10;
  }
  return c;
}

ExperimentConfig load_config(ExperimentKind kind, const json& doc) {
  ExperimentConfig c = default_config(kind);
  {
    Section root(doc, "config");
    std::string kind_name;
    root.get("kind", kind_name);
    if (!kind_name.empty() && parse_experiment_kind(kind_name) != kind)
      throw ConfigError("config kind '" + kind_name + "' does not match subcommand '" +
                        std::string(to_string(kind)) + "'");
    root.get("seed", c.seed);
    root.get("workers", c.workers);
    root.get("out", c.out);
    root.get("seeds", c.seeds);
    if (const json* g = root.child("grid")) {
      Section s(*g, "grid");
      s.get("depths", c.grid.depths);
      s.get("pretrained", c.grid.pretrained);
      s.get("d2", c.grid.d2);
      s.get("nu", c.grid.nu);
    }
    if (const json* t = root.child("training")) read_training(*t, c.training);
    if (const json* p = root.child("pretraining")) read_pretraining(*p, c.pretraining);
    if (const json* t = root.child("theory")) {
      Section s(*t, "theory");
      s.get("trials", c.theory.trials);
      s.get("concentration", c.theory.concentration);
      s.get("search_draws", c.theory.search_draws);
    }
    if (const json* r = root.child("rates")) {
      Section s(*r, "rates");
      s.get("d2", c.rates.d2);
      s.get("nu", c.rates.nu);
      s.get("n_grid", c.rates.n_grid);
      s.get("seeds_per_n", c.rates.seeds_per_n);
      std::string prior;
      s.get("prior", prior);
      if (prior == "known")
        c.rates.prior_mode = PriorMode::kKnown;
      else if (prior == "estimated")
        c.rates.prior_mode = PriorMode::kEstimated;
      else if (!prior.empty())
        throw ConfigError("rates.prior must be 'estimated' or 'known'");
    }
    if (const json* m = root.child("masksim")) read_masksim(*m, c.masksim);
  }
  c.validate();
  return c;
}

ExperimentConfig load_config_file(ExperimentKind kind, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return load_config(kind, doc);
}

json ExperimentConfig::to_json() const {
  json j;
  j["kind"] = to_string(kind);
  j["seed"] = seed;
  j["out"] = out;
  switch (kind) {
    case ExperimentKind::kTable1:
    case ExperimentKind::kTrajectories:
      j["seeds"] = seeds;
      j["grid"] = {{"depths", grid.depths}, {"pretrained", grid.pretrained}, {"d2", grid.d2}, {"nu", grid.nu}};
      j["training"] = {{"learning_rate", training.learning_rate},
                       {"batch_size", training.batch_size},
                       {"check_interval", training.check_interval},
                       {"consecutive_checks", training.consecutive_checks},
                       {"max_iterations", training.max_iterations},
                       {"beta1", training.beta1},
                       {"beta2", training.beta2},
                       {"epsilon", training.epsilon}};
      j["pretraining"] = {{"learning_rate", pretraining.learning_rate},
                          {"batch_size", pretraining.batch_size},
                          {"tolerance_nats", pretraining.tolerance_nats},
                          {"check_interval", pretraining.check_interval},
                          {"max_iterations", pretraining.max_iterations}};
      break;
    case ExperimentKind::kTheoryCheck:
      j["theory"] = {{"trials", theory.trials},
                     {"concentration", theory.concentration},
                     {"search_draws", theory.search_draws}};
      break;
    case ExperimentKind::kRates:
      j["rates"] = {{"d2", rates.d2},
                    {"nu", rates.nu},
                    {"n_grid", rates.n_grid},
                    {"seeds_per_n", rates.seeds_per_n},
                    {"prior", rates.prior_mode == PriorMode::kKnown ? "known" : "estimated"}};
      break;
    case ExperimentKind::kMasksim: {
      const SeqConfig& q = masksim.seq;
      std::vector<std::string> names;
      for (MaskPolicy p : masksim.policies) names.emplace_back(spur::to_string(p));
      j["masksim"] = {{"length", q.length},
                      {"vocab", q.vocab},
                      {"nu_s", q.nu_s},
                      {"mask_rate", q.mask_rate},
                      {"hidden", q.hidden},
                      {"pretrain_corpus", q.pretrain_corpus},
                      {"train_corpus", q.train_corpus},
                      {"eval_corpus", q.eval_corpus},
                      {"pretrain_iterations", q.pretrain_iterations},
                      {"finetune_iterations", q.finetune_iterations},
                      {"batch_size", q.batch_size},
                      {"learning_rate", q.learning_rate},
                      {"unk_at_finetune", q.unk_at_finetune},
                      {"seeds", masksim.seeds},
                      {"policies", names}};
      break;
    }
  }
  return j;
}

std::string ExperimentConfig::hash() const { return fnv1a_hex(to_json().dump()); }

}  // namespace spur::harness
