// Acceptance checks. Usage: acceptance <criterion-id>; prints one
// "[PASS]/[FAIL] criterion <id>: <detail>" line and exits 0 or 1.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "spur/harness.hpp"
#include "spur/infotheory.hpp"
#include "spur/nnet.hpp"

using namespace spur;
using namespace spur::harness;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("spurlab_accept_" + name);
  fs::remove_all(p);
  return p;
}

std::string failing(const RunResult& r) {
  std::string s;
  for (const auto& a : r.assertions)
    if (!a.pass) s += "; failed: " + a.name + " (" + a.detail + ")";
  return s;
}

// --- independent Pi oracle ---------------------------------------------------

// Mutual information (bits) between the first and second key of a joint
// given as a map over (a, b) pairs.
double mi_pairs(const std::map<std::pair<std::size_t, std::size_t>, double>& joint) {
  std::map<std::size_t, double> pa, pb;
  for (const auto& [k, p] : joint) {
    pa[k.first] += p;
    pb[k.second] += p;
  }
  double i = 0.0;
  for (const auto& [k, p] : joint)
    if (p > 0.0) i += p * std::log2(p / (pa[k.first] * pb[k.second]));
  return i;
}

struct OraclePi {
  std::size_t states = 0;
  double mi_pi_x1 = 0.0;
  double mi_pi_y = 0.0;
};

// Groups x2 values by their row P(X1 | x2), for a table with axes (X1, X2, Y).
OraclePi oracle_pi(const JointTable& t) {
  const std::size_t n1 = t.size(0), n2 = t.size(1), ny = t.size(2);
  std::vector<double> px2(n2, 0.0);
  std::vector<std::vector<double>> cond(n2, std::vector<double>(n1, 0.0));
  for (std::size_t a = 0; a < n1; ++a)
    for (std::size_t b = 0; b < n2; ++b)
      for (std::size_t y = 0; y < ny; ++y) {
        const std::size_t o[3] = {a, b, y};
        px2[b] += t.prob(o);
        cond[b][a] += t.prob(o);
      }
  std::vector<std::vector<long long>> keys;
  std::vector<std::size_t> state(n2, SIZE_MAX);
  for (std::size_t b = 0; b < n2; ++b) {
    if (px2[b] <= 0.0) continue;
    std::vector<long long> key;
    for (std::size_t a = 0; a < n1; ++a) key.push_back(std::llround(cond[b][a] / px2[b] * 1e10));
    const auto it = std::find(keys.begin(), keys.end(), key);
    state[b] = static_cast<std::size_t>(it - keys.begin());
    if (it == keys.end()) keys.push_back(key);
  }
  std::map<std::pair<std::size_t, std::size_t>, double> with_x1, with_y;
  for (std::size_t a = 0; a < n1; ++a)
    for (std::size_t b = 0; b < n2; ++b)
      for (std::size_t y = 0; y < ny; ++y) {
        if (state[b] == SIZE_MAX) continue;
        const std::size_t o[3] = {a, b, y};
        with_x1[{state[b], a}] += t.prob(o);
        with_y[{state[b], y}] += t.prob(o);
      }
  return {keys.size(), mi_pairs(with_x1), mi_pairs(with_y)};
}

// --- criteria ----------------------------------------------------------------------

Outcome criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  const CheckReport lib = sweep_pi_keeps_x1_information({1000, 0, 1.0});
  // Independent reproduction on separately drawn tables.
  double oracle_worst = 0.0;
  for (std::size_t t = 0; t < 1000; ++t) {
    Stream s = Stream::derive(0xACCE, 1, t);
    const JointTable table = random_joint_table(s);
    const double lhs = oracle_pi(table).mi_pi_x1;
    const double rhs = oracle::mi(table, {0}, {1});
    oracle_worst = std::max(oracle_worst, std::abs(lhs - rhs));
  }
  const double secs = seconds_since(t0);
  return {lib.max_violation <= 1e-9 && oracle_worst <= 1e-9 && secs < 30.0,
          fmt("max |I(X1;Pi)-I(X1;X2)| %.3e bits over %zu tables (oracle reproduction %.3e), %.2f s",
              lib.max_violation, lib.trials, oracle_worst, secs)};
}

Outcome criterion_2_deterministic() {
  const auto t0 = std::chrono::steady_clock::now();
  const CheckReport lib = sweep_pi_beats_x1({1000, 0, 1.0});
  double oracle_worst = 0.0;
  for (std::size_t t = 0; t < 1000; ++t) {
    Stream s = Stream::derive(0xACCE, 2, t);
    const JointTable table = random_deterministic_label_table(s);
    oracle_worst = std::max(oracle_worst, oracle::mi(table, {0}, {2}) - oracle_pi(table).mi_pi_y);
  }
  const double secs = seconds_since(t0);
  return {lib.max_violation <= 1e-9 && oracle_worst <= 1e-9 && secs < 60.0,
          fmt("deterministic-label tables: max (I(X1;Y)-I(Pi;Y)) %.3e bits over %zu (oracle %.3e), %.2f s",
              lib.max_violation, lib.trials, oracle_worst, secs)};
}

Outcome criterion_2_causal() {
  const auto t0 = std::chrono::steady_clock::now();
  const CheckReport lib = sweep_causal_pi_beats_x1({1000, 0, 1.0});
  const double secs = seconds_since(t0);
  return {lib.max_violation <= 1e-9 && secs < 60.0,
          fmt("causal graph models: max (I(X1;Y)-I(Pi;Y)) %.3e bits, %zu of %zu models violate, %.2f s",
              lib.max_violation, lib.failing_seeds.size(), lib.trials, secs)};
}

Outcome criterion_3() {
  const auto t0 = std::chrono::steady_clock::now();
  const CheckReport lib = sweep_anticausal_pi_matches_x2({1000, 0, 1.0});
  const double rec = lib.extra.at("recovery_error");
  const double secs = seconds_since(t0);
  return {lib.max_violation <= 1e-9 && rec <= 1e-6 && secs < 60.0,
          fmt("anticausal models: max |I(Pi;Y)-I(X2;Y)| %.3e bits, recovery inf-error %.3e, %.2f s",
              lib.max_violation, rec, secs)};
}

Outcome criterion_4() {
  const JointTable oracle_table({"X1", "X2", "Y"}, {2, 100, 2}, oracle::toy_probs(100, 0.25));
  const OraclePi op = oracle_pi(oracle_table);
  const double o_x1y = oracle::mi(oracle_table, {0}, {2});
  const double o_h = oracle::entropy(oracle_table, {0, 1}) - oracle::entropy(oracle_table, {1});

  const JointTable t = build_toy(ToyConfig(100, 0.25));
  const double x1y = mutual_information(t, std::vector<std::string>{"X1"}, std::vector<std::string>{"Y"});
  const std::size_t x1[] = {0}, x2[] = {1};
  const double h = conditional_entropy(t, x1, x2);
  const PiVariable pv = pi_as_variable(t);
  const double piy = mutual_information(pv.joint, std::vector<std::string>{"Pi"}, std::vector<std::string>{"Y"});

  const bool oracle_ok = std::abs(o_x1y - 0.1887219) <= 1e-6 && std::abs(op.mi_pi_y - 0.5) <= 1e-9 &&
                         std::abs(o_h - 0.5) <= 1e-9 && op.states == 3;
  const bool lib_ok = std::abs(x1y - 0.1887219) <= 1e-6 && std::abs(piy - 0.5) <= 1e-9 &&
                      std::abs(h - 0.5) <= 1e-9 && pv.states.size() == 3 && std::abs(x1y - o_x1y) <= 1e-12 &&
                      std::abs(piy - op.mi_pi_y) <= 1e-12;
  return {oracle_ok && lib_ok,
          fmt("I(X1;Y) %.9f, I(Pi;Y) %.12f, H(X1|X2) %.12f, %zu Pi states (oracle: %.9f, %.12f, %.12f, %zu)", x1y,
              piy, h, pv.states.size(), o_x1y, op.mi_pi_y, o_h, op.states)};
}

Outcome criterion_5() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig c = default_config(ExperimentKind::kRates);
  OutputDir out(scratch("rates"), c.hash());
  const RunResult r = run_rates(c, out);
  const double secs = seconds_since(t0);
  std::string slopes;
  for (const auto& f : r.summary["fits"]) slopes += fmt("%s slope %.4f, ", f["learner"].get<std::string>().c_str(),
                                                        f["slope"].get<double>());
  return {r.all_passed() && secs < 300.0, slopes + fmt("%.1f s", secs) + failing(r)};
}

Outcome criterion_6() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig c = default_config(ExperimentKind::kTable1);
  c.workers = 4;
  OutputDir out(scratch("table1"), c.hash());
  const RunResult r = run_table1(c, out);
  const double secs = seconds_since(t0);
  std::size_t passed = 0;
  for (const auto& a : r.assertions) passed += a.pass;
  return {r.all_passed() && secs < 1800.0,
          fmt("%zu/%zu trend assertions pass, %.1f s", passed, r.assertions.size(), secs) + failing(r)};
}

Outcome criterion_7() {
  ExperimentConfig c = default_config(ExperimentKind::kTrajectories);
  OutputDir out(scratch("trajectories"), c.hash());
  const RunResult r = run_trajectories(c, out);
  std::string detail;
  for (const auto& a : r.assertions) detail += a.name + ": " + a.detail + "; ";
  return {r.all_passed(), detail};
}

Outcome criterion_8() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::size_t nets = 0;
  for (std::size_t depth = 1; depth <= 3; ++depth)
    for (std::size_t k = 0; k < 20; ++k, ++nets) {
      Stream s = Stream::derive(0x6AAD, depth, k);
      std::vector<std::size_t> widths{6 + s.index(10)};
      for (std::size_t l = 1; l < depth; ++l) widths.push_back(2 + s.index(8));
      widths.push_back(2 + s.index(2));
      const Network net = init_network(widths, s);
      SparseBatch batch;
      for (std::size_t i = 0; i < 8; ++i) {
        std::vector<std::uint32_t> active;
        for (std::uint32_t j = 0; j < widths[0]; ++j)
          if (s.bernoulli(0.4)) active.push_back(j);
        batch.add(active, s.index(widths.back()));
      }
      worst = std::max(worst, oracle::gradient_error(net, batch));
    }
  const double secs = seconds_since(t0);
  return {worst <= 1e-5 && secs < 5.0,
          fmt("max relative gradient error %.3e over %zu networks (depths 1-3), %.2f s", worst, nets, secs)};
}

Outcome criterion_9() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig c = default_config(ExperimentKind::kMasksim);
  OutputDir out(scratch("masksim"), c.hash());
  const RunResult r = run_masksim(c, out);
  const double secs = seconds_since(t0);
  std::string detail;
  for (const auto& a : r.assertions) detail += fmt("[%s] ", a.pass ? "ok" : "x") + a.name + ": " + a.detail + "; ";
  return {r.all_passed() && secs < 600.0, detail + fmt("%.1f s", secs)};
}

std::map<std::string, std::string> result_files(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.ends_with(".manifest.json")) continue;
    std::ifstream f(e.path(), std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    files[name] = s.str();
  }
  return files;
}

Outcome criterion_10() {
  std::vector<ExperimentConfig> configs;
  for (auto k : {ExperimentKind::kTable1, ExperimentKind::kTrajectories, ExperimentKind::kTheoryCheck,
                 ExperimentKind::kRates})
    configs.push_back(default_config(k));
  configs.push_back(load_config(ExperimentKind::kMasksim, json{{"seed", 3},
                                                               {"masksim",
                                                                {{"seeds", 5},
                                                                 {"pretrain_corpus", 4000},
                                                                 {"pretrain_iterations", 600},
                                                                 {"train_corpus", 1000},
                                                                 {"eval_corpus", 1000}}}}));
  std::string detail;
  bool ok = true;
  for (ExperimentConfig c : configs) {
    const std::string kind(to_string(c.kind));
    std::map<std::string, std::string> runs[3];
    const std::size_t workers[3] = {1, 4, 1};
    for (int i = 0; i < 3; ++i) {
      c.workers = workers[i];
      const fs::path dir = scratch(kind + "_" + std::to_string(i));
      OutputDir out(dir, c.hash());
      run_experiment(c, out);
      runs[i] = result_files(dir);
    }
    const bool same = !runs[0].empty() && runs[0] == runs[1] && runs[0] == runs[2];
    ok &= same;
    detail += fmt("%s %zu files %s; ", kind.c_str(), runs[0].size(), same ? "identical" : "DIFFER");
  }
  return {ok, detail + "workers 1, 4 and a repeat at 1"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<std::string, std::function<Outcome()>> criteria{
      {"1", criterion_1}, {"2-deterministic", criterion_2_deterministic}, {"2-causal", criterion_2_causal},
      {"3", criterion_3}, {"4", criterion_4},                   {"5", criterion_5},
      {"6", criterion_6}, {"7", criterion_7},                   {"8", criterion_8},
      {"9", criterion_9}, {"10", criterion_10}};
  std::vector<std::string> ids;
  if (argc > 1) {
    ids.assign(argv + 1, argv + argc);
  } else {
    for (const auto& [id, fn] : criteria) ids.push_back(id);
  }
  bool all = true;
  for (const auto& id : ids) {
    const auto it = criteria.find(id);
    if (it == criteria.end()) {
      std::fprintf(stderr, "unknown criterion '%s'\n", id.c_str());
      return 2;
    }
    Outcome o;
    try {
      o = it->second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[%s] criterion %s: %s\n", o.pass ? "PASS" : "FAIL", id.c_str(), o.detail.c_str());
    all &= o.pass;
  }
  return all ? 0 : 1;
}
