#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

#include "spur/errors.hpp"
#include "spur/harness.hpp"
#include "spur/infotheory.hpp"
#include "spur/parallel.hpp"
#include "spur/rng.hpp"

namespace spur::harness {

using nlohmann::json;

bool RunResult::all_passed() const {
  return std::all_of(assertions.begin(), assertions.end(), [](const Assertion& a) { return a.pass; });
}

json assertions_json(std::span<const Assertion> assertions) {
  json arr = json::array();
  for (const auto& a : assertions) arr.push_back({{"name", a.name}, {"pass", a.pass}, {"detail", a.detail}});
  return arr;
}

namespace {

class Clock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

std::string nu_tag(double nu) { return fmt("%.2f", nu); }

// Seed for one toy run. It depends on (depth, d2, nu) and the seed index but
// not on the pretraining flag, so pretrained and plain runs are paired.
std::uint64_t toy_run_seed(std::uint64_t master, std::size_t depth, std::size_t d2, double nu, std::size_t seed) {
  const auto nu_code = static_cast<std::uint64_t>(std::llround(nu * 1e6));
  Stream cell = Stream::derive(master, depth * 1000003ull + d2, nu_code);
  return Stream::derive(cell.engine()(), seed, 0).engine()();
}

TrainReport toy_run(const ExperimentConfig& config, const GridCell& cell, std::size_t seed) {
  const ToyConfig toy(cell.d2, cell.nu);
  const std::uint64_t run_seed = toy_run_seed(config.seed, cell.depth, cell.d2, cell.nu, seed);
  Stream init = Stream::derive(run_seed, 1, 0);
  Network net = init_network(toy_widths(toy.input_width(), cell.depth), init);
  TrainConfig tc = config.training;
  tc.seed = run_seed;
  if (!cell.pretrained) return train_until_converged(toy, std::move(net), tc);
  PretrainConfig pc = config.pretraining;
  pc.seed = run_seed;
  PretrainResult pre = pretrain_first_layer(std::move(net), toy, pc);
  init_passthrough(pre.network, pre.k);
  return finetune(toy, std::move(pre.network), tc);
}

double pooled_sd(const Table1Cell& a, const Table1Cell& b) {
  return std::sqrt(0.5 * (a.sd_iters * a.sd_iters + b.sd_iters * b.sd_iters));
}

// Published mean iterations (25 seeds, unknown batch size), for an order-of-magnitude
// comparison only. Key: depth, pretrained, d2, nu * 100.
const std::map<std::tuple<std::size_t, bool, std::size_t, int>, double>& reference_means() {
  static const auto table = [] {
    std::map<std::tuple<std::size_t, bool, std::size_t, int>, double> m;
    const int nus[] = {4, 10, 25, 50};
    const std::size_t d2s[] = {50, 100, 500};
    const double rows[12][5] = {{3680, 691, 614, 302, 249}, {2664, 530, 441, 242, 180}, {1420, 352, 300, 179, 148},
                                {306, 141, 118, 106, 89},   {5466, 945, 689, 431, 275}, {3789, 677, 478, 317, 208},
                                {1952, 428, 330, 214, 169}, {330, 156, 133, 128, 112},  {11127, 1953, 857, 792, 431},
                                {7912, 1279, 657, 550, 402}, {4321, 772, 501, 399, 391}, {576, 392, 407, 367, 386}};
    for (int r = 0; r < 12; ++r) {
      const std::size_t d2 = d2s[r / 4];
      const int nu = nus[r % 4];
      m[{1, false, d2, nu}] = rows[r][0];
      m[{2, false, d2, nu}] = rows[r][1];
      m[{2, true, d2, nu}] = rows[r][2];
      m[{3, false, d2, nu}] = rows[r][3];
      m[{3, true, d2, nu}] = rows[r][4];
    }
    return m;
  }();
  return table;
}

}  // namespace

// --- iterations grid -----------------------------------------------------------------

std::vector<Table1Cell> table1_cells(const ExperimentConfig& config) {
  const auto cells = config.cells();
  const std::size_t seeds = config.seeds;
  std::vector<TrainReport> runs(cells.size() * seeds);
  parallel_for(runs.size(), config.workers, [&](std::size_t i) {
    TrainReport r = toy_run(config, cells[i / seeds], i % seeds);
    r.trajectory.clear();
    r.trajectory.shrink_to_fit();
    runs[i] = std::move(r);
  });

  std::vector<Table1Cell> out;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    Table1Cell t{cells[c], seeds};
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t s = 0; s < seeds; ++s) {
      const TrainReport& r = runs[c * seeds + s];
      if (!r.converged) continue;
      const double it = static_cast<double>(r.iterations_to_converge);
      ++t.n_converged;
      s1 += it;
      s2 += it * it;
    }
    const double n = static_cast<double>(t.n_converged);
    t.mean_iters = t.n_converged ? s1 / n : std::numeric_limits<double>::quiet_NaN();
    t.sd_iters = t.n_converged > 1 ? std::sqrt(std::max(0.0, (s2 - n * t.mean_iters * t.mean_iters) / (n - 1.0))) : 0.0;
    out.push_back(t);
  }
  return out;
}

std::string table1_csv(std::span<const Table1Cell> cells) {
  std::ostringstream out;
  out << "depth,pretrained,d2,nu,seeds,mean_iters,sd_iters,n_converged\n";
  char buf[200];
  for (const auto& t : cells) {
    std::snprintf(buf, sizeof buf, "%zu,%d,%zu,%.4f,%zu,%.4f,%.4f,%zu\n", t.cell.depth, t.cell.pretrained ? 1 : 0,
                  t.cell.d2, t.cell.nu, t.seeds, t.mean_iters, t.sd_iters, t.n_converged);
    out << buf;
  }
  return out.str();
}

std::vector<Assertion> table1_assertions(std::span<const Table1Cell> cells) {
  std::vector<Assertion> out;
  using Key = std::tuple<std::size_t, bool, std::size_t>;
  std::map<Key, std::vector<const Table1Cell*>> by_group;
  for (const auto& t : cells) by_group[{t.cell.depth, t.cell.pretrained, t.cell.d2}].push_back(&t);

  // Mean iterations non-increasing in nu, one inversion within a pooled sd allowed.
  for (auto& [key, group] : by_group) {
    if (group.size() < 2) continue;
    std::sort(group.begin(), group.end(), [](auto* a, auto* b) { return a->cell.nu < b->cell.nu; });
    std::size_t inversions = 0;
    bool within = true;
    for (std::size_t i = 0; i + 1 < group.size(); ++i) {
      const Table1Cell &a = *group[i], &b = *group[i + 1];
      if (!(b.mean_iters <= a.mean_iters)) {
        ++inversions;
        within = within && (b.mean_iters - a.mean_iters) <= pooled_sd(a, b);
      }
    }
    const auto [depth, pre, d2] = key;
    out.push_back({"iterations non-increasing in nu (depth " + std::to_string(depth) + (pre ? ", pretrained" : "") +
                       ", d2 " + std::to_string(d2) + ")",
                   inversions == 0 || (inversions == 1 && within),
                   std::to_string(inversions) + " inversion(s)"});
  }

  // Pretraining helps for depth >= 2, d2 >= 100, nu < 0.5.
  for (const auto& t : cells) {
    if (!t.cell.pretrained || t.cell.d2 < 100 || t.cell.nu >= 0.5) continue;
    for (const auto& u : cells)
      if (!u.cell.pretrained && u.cell.depth == t.cell.depth && u.cell.d2 == t.cell.d2 && u.cell.nu == t.cell.nu)
        out.push_back({"pretrained faster (depth " + std::to_string(t.cell.depth) + ", d2 " +
                           std::to_string(t.cell.d2) + ", nu " + nu_tag(t.cell.nu) + ")",
                       t.mean_iters < u.mean_iters, fmt("%.1f vs %.1f", t.mean_iters, u.mean_iters)});
  }

  // Depth 1: more iterations for larger d2 at fixed nu.
  std::map<double, std::vector<const Table1Cell*>> by_nu;
  for (const auto& t : cells)
    if (t.cell.depth == 1 && !t.cell.pretrained) by_nu[t.cell.nu].push_back(&t);
  for (auto& [nu, group] : by_nu) {
    if (group.size() < 2) continue;
    std::sort(group.begin(), group.end(), [](auto* a, auto* b) { return a->cell.d2 < b->cell.d2; });
    bool increasing = true;
    std::string detail;
    for (std::size_t i = 0; i < group.size(); ++i) {
      if (i + 1 < group.size()) increasing = increasing && group[i]->mean_iters < group[i + 1]->mean_iters;
      detail += (i ? " < " : "") + fmt("%.1f", group[i]->mean_iters);
    }
    out.push_back({"iterations increasing in d2 (depth 1, nu " + nu_tag(nu) + ")", increasing, detail});
  }

  for (const auto& t : cells)
    if (t.n_converged == 0)
      out.push_back({"cell converged (depth " + std::to_string(t.cell.depth) + ", d2 " + std::to_string(t.cell.d2) +
                         ", nu " + nu_tag(t.cell.nu) + ")",
                     false, "no seed converged"});
  return out;
}

RunResult run_table1(const ExperimentConfig& config, OutputDir& out) {
  Clock clock;
  const auto cells = table1_cells(config);
  RunResult res;
  res.assertions = table1_assertions(cells);

  json cell_json = json::array();
  json informational = json::array();
  for (const auto& t : cells) {
    cell_json.push_back({{"depth", t.cell.depth},
                         {"pretrained", t.cell.pretrained},
                         {"d2", t.cell.d2},
                         {"nu", t.cell.nu},
                         {"seeds", t.seeds},
                         {"mean_iters", t.mean_iters},
                         {"sd_iters", t.sd_iters},
                         {"n_converged", t.n_converged}});
    const auto key = std::make_tuple(t.cell.depth, t.cell.pretrained, t.cell.d2,
                                     static_cast<int>(std::llround(t.cell.nu * 100)));
    auto it = reference_means().find(key);
    if (it != reference_means().end() && t.n_converged > 0)
      informational.push_back({{"depth", t.cell.depth},
                               {"pretrained", t.cell.pretrained},
                               {"d2", t.cell.d2},
                               {"nu", t.cell.nu},
                               {"reference_mean", it->second},
                               {"log10_ratio", std::log10(t.mean_iters / it->second)}});
    if (t.cell.pretrained && t.cell.nu >= 0.5)
      for (const auto& u : cells)
        if (!u.cell.pretrained && u.cell.depth == t.cell.depth && u.cell.d2 == t.cell.d2 && u.cell.nu == t.cell.nu)
          informational.push_back({{"depth", t.cell.depth},
                                   {"d2", t.cell.d2},
                                   {"nu", t.cell.nu},
                                   {"pretrain_vs_plain_within_pooled_sd",
                                    std::abs(t.mean_iters - u.mean_iters) <= pooled_sd(t, u)}});
  }
  res.summary = {{"experiment", "table1"},
                 {"cells", cell_json},
                 {"assertions", assertions_json(res.assertions)},
                 {"informational", informational},
                 {"all_passed", res.all_passed()}};
  out.write_text("table1.csv", table1_csv(cells), clock.seconds());
  out.write_json("table1.json", res.summary, clock.seconds());
  return res;
}

// --- trajectories --------------------------------------------------------------

TrajectoryPair trajectory_pair(const ExperimentConfig& config, std::size_t d2, double nu, std::size_t seed_index) {
  return {toy_run(config, {2, false, d2, nu}, seed_index), toy_run(config, {2, true, d2, nu}, seed_index)};
}

TrajectoryShapeCounts trajectory_shape_counts(std::span<const TrajectoryPair> runs, double nu) {
  TrajectoryShapeCounts c;
  c.seeds = runs.size();
  for (const auto& r : runs) {
    const auto& tr = r.plain.trajectory;
    std::size_t plateau = tr.size();
    for (std::size_t i = 0; i < tr.size(); ++i)
      if (tr[i].accuracy >= 1.0 - nu - 0.01 && tr[i].accuracy < 1.0 && tr[i].avg_w_x1 > tr[i].avg_w_zone) {
        plateau = i;
        break;
      }
    bool crossing = false;
    if (r.plain.converged)
      for (std::size_t i = plateau + 1; i < tr.size() && tr[i].iteration <= r.plain.iterations_to_converge; ++i)
        crossing = crossing || tr[i].avg_w_zone > tr[i].avg_w_x1;
    c.plateau_then_crossing += plateau < tr.size() && crossing;

    if (!tr.empty() && !r.pretrained.trajectory.empty()) {
      double peak = 0.0;
      for (const auto& p : r.pretrained.trajectory) peak = std::max(peak, p.avg_w_x1);
      c.pretrained_peak_below += peak < tr.back().avg_w_x1;
    }
  }
  return c;
}

RunResult run_trajectories(const ExperimentConfig& config, OutputDir& out) {
  Clock clock;
  struct Cell {
    std::size_t d2;
    double nu;
  };
  std::vector<Cell> cells;
  for (std::size_t d2 : config.grid.d2)
    for (double nu : config.grid.nu) cells.push_back({d2, nu});
  const std::size_t seeds = config.seeds;
  std::vector<TrajectoryPair> runs(cells.size() * seeds);
  parallel_for(runs.size(), config.workers, [&](std::size_t i) {
    runs[i] = trajectory_pair(config, cells[i / seeds].d2, cells[i / seeds].nu, i % seeds);
  });

  const bool want_plain =
      std::find(config.grid.pretrained.begin(), config.grid.pretrained.end(), false) != config.grid.pretrained.end();
  const bool want_pre =
      std::find(config.grid.pretrained.begin(), config.grid.pretrained.end(), true) != config.grid.pretrained.end();

  RunResult res;
  json cell_json = json::array();
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const std::string stem = "traj_d2-" + std::to_string(cells[c].d2) + "_nu-" + nu_tag(cells[c].nu);
    for (std::size_t s = 0; s < seeds; ++s) {
      const TrajectoryPair& r = runs[c * seeds + s];
      const std::string run_stem = stem + "_seed-" + std::to_string(s);
      if (want_plain) out.write_text(run_stem + "_plain.csv", trajectory_csv(r.plain.trajectory), clock.seconds());
      if (want_pre)
        out.write_text(run_stem + "_pretrained.csv", trajectory_csv(r.pretrained.trajectory), clock.seconds());
    }
    const TrajectoryPair& first = runs[c * seeds];
    const std::string title = "d2 = " + std::to_string(cells[c].d2) + ", nu = " + nu_tag(cells[c].nu);
    if (want_plain)
      out.write_text(stem + "_plain.svg", trajectory_svg(first.plain.trajectory, title + ", no pretraining (seed 0)"),
                     clock.seconds());
    if (want_pre)
      out.write_text(stem + "_pretrained.svg",
                     trajectory_svg(first.pretrained.trajectory, title + ", pretrained (seed 0)"), clock.seconds());

    const TrajectoryShapeCounts fc = trajectory_shape_counts(std::span(runs).subspan(c * seeds, seeds), cells[c].nu);
    const std::size_t required = seeds / 2 + 1;
    json iters = json::array(), iters_pre = json::array();
    for (std::size_t s = 0; s < seeds; ++s) {
      iters.push_back(runs[c * seeds + s].plain.iterations_to_converge);
      iters_pre.push_back(runs[c * seeds + s].pretrained.iterations_to_converge);
    }
    cell_json.push_back({{"d2", cells[c].d2},
                         {"nu", cells[c].nu},
                         {"seeds", seeds},
                         {"plateau_then_crossing", fc.plateau_then_crossing},
                         {"pretrained_peak_below_plain_final", fc.pretrained_peak_below},
                         {"iterations_plain", iters},
                         {"iterations_pretrained", iters_pre}});
    if (cells[c].nu < 0.5 && want_plain && want_pre) {
      const std::string where = " (" + title + ")";
      res.assertions.push_back({"plateau with X1 ahead, zone overtakes X1 before convergence" + where,
                                fc.plateau_then_crossing >= required,
                                std::to_string(fc.plateau_then_crossing) + "/" + std::to_string(seeds) + " seeds"});
      res.assertions.push_back({"pretrained peak X1 weight below unpretrained final" + where,
                                fc.pretrained_peak_below >= required,
                                std::to_string(fc.pretrained_peak_below) + "/" + std::to_string(seeds) + " seeds"});
    }
  }
  res.summary = {{"experiment", "trajectories"},
                 {"accuracy", "exact distribution accuracy"},
                 {"cells", cell_json},
                 {"assertions", assertions_json(res.assertions)},
                 {"all_passed", res.all_passed()}};
  out.write_json("trajectories.json", res.summary, clock.seconds());
  return res;
}

// --- theory checks ---------------------------------------------------------------

RunResult run_theory_checks(const ExperimentConfig& config, OutputDir& out) {
  Clock clock;
  const SweepOptions opts{config.theory.trials, config.seed, config.theory.concentration};
  // Independent sweeps, each fully determined by its own stream tags.
  CheckReport reports[5];
  CounterexampleResult search;
  parallel_for(6, config.workers, [&](std::size_t i) {
    switch (i) {
      case 0: reports[0] = sweep_pi_keeps_x1_information(opts); break;
      case 1: reports[1] = sweep_pi_beats_x1(opts); break;
      case 2: reports[2] = sweep_causal_pi_beats_x1(opts); break;
      case 3: reports[3] = sweep_anticausal_pi_matches_x2(opts); break;
      case 4: {
        CheckReport r;
        r.check = "convexity";
        for (std::size_t t = 0; t < opts.trials; ++t) {
          Stream s = Stream::derive(opts.master_seed, 6, t);
          double worst = 0.0;
          for (double g : convexity_gaps(random_joint_table(s, opts.concentration)))
            if (std::isfinite(g)) worst = std::max(worst, -g);
          r.record(worst, t, 1e-9);
        }
        reports[4] = r;
        break;
      }
      case 5:
        search = find_pi_ordering_counterexample(config.theory.search_draws, config.seed, opts.concentration);
        break;
    }
  });

  RunResult res;
  json checks = json::array();
  for (const auto& r : reports) {
    checks.push_back(r.to_json());
    res.assertions.push_back({r.check + " max violation <= 1e-9", r.max_violation <= 1e-9,
                              fmt("max violation %.3e over %.0f trials", r.max_violation,
                                  static_cast<double>(r.trials))});
  }
  const double rec = reports[3].extra.at("recovery_error");
  res.assertions.push_back({"anticausal posterior recovery error <= 1e-6", rec <= 1e-6, fmt("%.3e", rec)});
  res.assertions.push_back({"pi_per_feature search finds I(Pi_3;Y) > I(Pi_1;Y)", search.found,
                            search.found ? "seed " + std::to_string(search.seed)
                                         : "none in " + std::to_string(search.draws) + " draws"});
  res.summary = {{"experiment", "theory-check"},
                 {"checks", checks},
                 {"pi_per_feature_search",
                  {{"found", search.found},
                   {"seed", search.seed},
                   {"draws", search.draws},
                   {"mi_pi1_y", search.mi_pi1},
                   {"mi_pi3_y", search.mi_pi3}}},
                 {"assertions", assertions_json(res.assertions)},
                 {"all_passed", res.all_passed()}};
  out.write_json("theory.json", res.summary, clock.seconds());
  return res;
}

// --- rates ---------------------------------------------------------------------------

RunResult run_rates(const ExperimentConfig& config, OutputDir& out) {
  Clock clock;
  const JointTable table = build_toy(ToyConfig(config.rates.d2, config.rates.nu));
  RateOptions opts;
  opts.n_grid = config.rates.n_grid;
  opts.seeds_per_n = config.rates.seeds_per_n;
  opts.prior_mode = config.rates.prior_mode;
  opts.master_seed = config.seed;
  opts.workers = config.workers;
  const RateReport report = convergence_experiment(table, opts);

  RunResult res;
  for (const auto& f : report.fits)
    res.assertions.push_back({f.learner + " log-log slope in [-1.25, -0.75]", f.slope >= -1.25 && f.slope <= -0.75,
                              fmt("slope %.4f", f.slope)});
  res.assertions.push_back({"pi classifier limit divergence <= count classifier limit divergence",
                            report.divergence_pi_limit <= report.divergence_count_limit,
                            fmt("%.6g vs %.6g nats", report.divergence_pi_limit, report.divergence_count_limit)});
  res.summary = report.summary();
  res.summary["experiment"] = "rates";
  res.summary["assertions"] = assertions_json(res.assertions);
  res.summary["all_passed"] = res.all_passed();
  out.write_text("rates.csv", report.to_csv(), clock.seconds());
  out.write_json("rates.json", res.summary, clock.seconds());
  return res;
}

// --- masking policies -------------------------------------------------------------

double empirical_masked_tokens(const SeqConfig& config, MaskPolicy policy, std::size_t n, std::uint64_t seed) {
  Stream stream = Stream::derive(seed, 0xE3, static_cast<std::uint64_t>(policy));
  Stream gen = Stream::derive(seed, 0xE4, 0);
  const auto corpus = gen_corpus(config, gen, 1, false);
  std::size_t total = 0;
  for (std::size_t i = 0; i < n; ++i) total += apply_policy(config, corpus[0], policy, stream).loss_positions.size();
  return static_cast<double>(total) / static_cast<double>(n);
}

RunResult run_masksim(const ExperimentConfig& config, OutputDir& out) {
  Clock clock;
  const auto& m = config.masksim;
  const PolicySuiteReport report = run_policy_suite(m.seq, m.seeds, config.seed, config.workers, m.policies);

  RunResult res;
  for (const auto& c : report.checks)
    res.assertions.push_back(
        {c.name, c.pass(), std::to_string(c.wins) + "/" + std::to_string(c.seeds) + " seeds, " +
                               std::to_string(c.required) + " required"});

  const MaskPolicy matched[] = {MaskPolicy::kUnmaskRandom, MaskPolicy::kUnmaskSpurious, MaskPolicy::kUnknownSpurious};
  double lo_exact = 1e300, hi_exact = 0.0, lo_emp = 1e300, hi_emp = 0.0;
  json empirical = json::object();
  for (MaskPolicy p : matched) {
    const double e = expected_masked_tokens(m.seq, p);
    const double s = empirical_masked_tokens(m.seq, p, 400000, config.seed);
    empirical[std::string(spur::to_string(p))] = s;
    lo_exact = std::min(lo_exact, e);
    hi_exact = std::max(hi_exact, e);
    lo_emp = std::min(lo_emp, s);
    hi_emp = std::max(hi_emp, s);
  }
  res.assertions.push_back({"expected masked tokens of unmask_random, unmask_spurious, unknown_spurious within 1%",
                            hi_exact <= 1.01 * lo_exact && hi_emp <= 1.01 * lo_emp,
                            fmt("exact spread %.4f%%, sampled spread %.4f%%", 100.0 * (hi_exact / lo_exact - 1.0),
                                100.0 * (hi_emp / lo_emp - 1.0))});

  res.summary = report.summary();
  res.summary["experiment"] = "masksim";
  res.summary["sampled_masked_tokens"] = empirical;
  res.summary["assertions"] = assertions_json(res.assertions);
  res.summary["all_passed"] = res.all_passed();
  out.write_text("masksim.csv", report.to_csv(), clock.seconds());
  out.write_json("masksim.json", res.summary, clock.seconds());
  return res;
}

RunResult run_experiment(const ExperimentConfig& config, OutputDir& out) {
  switch (config.kind) {
    case ExperimentKind::kTable1: return run_table1(config, out);
    case ExperimentKind::kTrajectories: return run_trajectories(config, out);
    case ExperimentKind::kTheoryCheck: return run_theory_checks(config, out);
    case ExperimentKind::kRates: return run_rates(config, out);
    case ExperimentKind::kMasksim: return run_masksim(config, out);
  }
  throw ConfigError("unknown experiment kind");
}

}  // namespace spur::harness
