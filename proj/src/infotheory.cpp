#include "spur/infotheory.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "spur/errors.hpp"

namespace spur {

namespace {

constexpr std::size_t kUndefined = std::numeric_limits<std::size_t>::max();

std::vector<std::size_t> concat(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  std::vector<std::size_t> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

std::vector<std::size_t> axes_of(const JointTable& t, const std::vector<std::string>& names) {
  std::vector<std::size_t> out;
  for (const auto& n : names) out.push_back(t.axis(n));
  return out;
}

// Flattened configuration of `axes` at a cell (last axis fastest).
std::size_t config_of(const JointTable& t, std::size_t flat, std::span<const std::size_t> axes) {
  std::size_t c = 0;
  for (std::size_t a : axes) c = c * t.size(a) + (flat / t.stride(a)) % t.size(a);
  return c;
}

std::size_t configs(const JointTable& t, std::span<const std::size_t> axes) {
  std::size_t n = 1;
  for (std::size_t a : axes) n *= t.size(a);
  return n;
}

std::vector<std::int64_t> row_key(const std::vector<double>& row) {
  std::vector<std::int64_t> key(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) key[i] = std::llround(row[i] * 1e12);
  return key;
}

}  // namespace

double entropy(std::span<const double> dist) {
  double h = 0.0;
  for (double p : dist)
    if (p > 0.0) h -= p * std::log2(p);
  return h;
}

double entropy(const JointTable& table, std::span<const std::size_t> axes) {
  if (axes.empty()) return 0.0;
  return entropy(project(table, axes).probs());
}

double conditional_entropy(const JointTable& table, std::span<const std::size_t> target,
                           std::span<const std::size_t> given) {
  return entropy(table, concat(target, given)) - entropy(table, given);
}

double mutual_information(const JointTable& table, std::span<const std::size_t> a,
                          std::span<const std::size_t> b, std::span<const std::size_t> given) {
  for (std::size_t x : a) {
    if (std::find(b.begin(), b.end(), x) != b.end() || std::find(given.begin(), given.end(), x) != given.end())
      throw InvalidArgument("mutual information axis sets must be disjoint");
  }
  for (std::size_t x : b)
    if (std::find(given.begin(), given.end(), x) != given.end())
      throw InvalidArgument("mutual information axis sets must be disjoint");
  const auto ac = concat(a, given);
  const auto bc = concat(b, given);
  const auto abc = concat(ac, b);
  double mi = entropy(table, ac) + entropy(table, bc) - entropy(table, abc) - entropy(table, given);
  if (mi < 0.0 && mi > -1e-12) mi = 0.0;
  return mi;
}

double mutual_information(const JointTable& table, const std::vector<std::string>& a,
                          const std::vector<std::string>& b, const std::vector<std::string>& given) {
  return mutual_information(table, axes_of(table, a), axes_of(table, b), axes_of(table, given));
}

PiTable compute_pi(const JointTable& table, std::size_t target, std::span<const std::size_t> context) {
  if (target >= table.rank()) throw InvalidArgument("target axis out of range");
  if (std::find(context.begin(), context.end(), target) != context.end())
    throw InvalidArgument("target axis cannot be part of its own context");
  PiTable pi;
  pi.target = table.name(target);
  for (std::size_t a : context) pi.context.push_back(table.name(a));
  const std::size_t n_ctx = configs(table, context), n_tgt = table.size(target);
  std::vector<double> acc(n_ctx * n_tgt, 0.0);
  const auto probs = table.probs();
  for (std::size_t flat = 0; flat < probs.size(); ++flat) {
    if (probs[flat] == 0.0) continue;
    const std::size_t c = config_of(table, flat, context);
    acc[c * n_tgt + (flat / table.stride(target)) % n_tgt] += probs[flat];
  }
  pi.rows.assign(n_ctx, std::vector<double>(n_tgt, 0.0));
  pi.defined.assign(n_ctx, false);
  for (std::size_t c = 0; c < n_ctx; ++c) {
    const double mass = std::accumulate(acc.begin() + c * n_tgt, acc.begin() + (c + 1) * n_tgt, 0.0);
    if (!(mass > 0.0)) continue;
    pi.defined[c] = true;
    for (std::size_t v = 0; v < n_tgt; ++v) pi.rows[c][v] = acc[c * n_tgt + v] / mass;
  }
  return pi;
}

PiTable compute_pi(const JointTable& table) {
  const std::size_t ctx[] = {table.axis("X2")};
  return compute_pi(table, table.axis("X1"), ctx);
}

PiVariable induce_pi(const JointTable& table, std::size_t target, std::span<const std::size_t> context,
                     std::span<const std::size_t> keep) {
  const PiTable pi = compute_pi(table, target, context);
  PiVariable out;
  out.state_of.assign(pi.num_rows(), kUndefined);
  std::map<std::vector<std::int64_t>, std::size_t> ids;
  for (std::size_t c = 0; c < pi.num_rows(); ++c) {
    if (!pi.defined[c]) continue;
    auto [it, inserted] = ids.emplace(row_key(pi.rows[c]), out.states.size());
    if (inserted) out.states.push_back(pi.rows[c]);
    out.state_of[c] = it->second;
  }

  std::vector<std::string> names{"Pi"};
  std::vector<std::size_t> sizes{std::max<std::size_t>(out.states.size(), 1)};
  for (std::size_t a : keep) {
    names.push_back(table.name(a));
    sizes.push_back(table.size(a));
  }
  const std::size_t n_keep = configs(table, keep);
  std::vector<double> acc(sizes[0] * n_keep, 0.0);
  const auto probs = table.probs();
  for (std::size_t flat = 0; flat < probs.size(); ++flat) {
    if (probs[flat] == 0.0) continue;
    const std::size_t s = out.state_of[config_of(table, flat, context)];
    acc[s * n_keep + config_of(table, flat, keep)] += probs[flat];
  }
  out.joint = JointTable::from_weights(std::move(names), std::move(sizes), std::move(acc));
  return out;
}

PiVariable pi_as_variable(const JointTable& table) {
  const std::size_t ctx[] = {table.axis("X2")};
  const std::size_t keep[] = {table.axis("X1"), table.axis("Y")};
  return induce_pi(table, table.axis("X1"), ctx, keep);
}

void CheckReport::record(double violation, std::uint64_t seed, double tolerance) {
  ++trials;
  max_violation = std::max(max_violation, violation);
  if (violation > tolerance) failing_seeds.push_back(seed);
}

void CheckReport::merge(const CheckReport& other, double tolerance) {
  trials += other.trials;
  max_violation = std::max(max_violation, other.max_violation);
  failing_seeds.insert(failing_seeds.end(), other.failing_seeds.begin(), other.failing_seeds.end());
  (void)tolerance;
  for (const auto& [k, v] : other.extra) {
    auto it = extra.find(k);
    extra[k] = it == extra.end() ? v : std::max(it->second, v);
  }
}

nlohmann::json CheckReport::to_json() const {
  nlohmann::json j{{"check", check}, {"trials", trials}, {"max_violation", max_violation},
                   {"failing_seeds", failing_seeds}};
  for (const auto& [k, v] : extra) j[k] = v;
  return j;
}

CheckReport check_pi_keeps_x1_information(const JointTable& table) {
  const PiVariable pv = pi_as_variable(table);
  const double mi_pi = mutual_information(pv.joint, {"X1"}, {"Pi"});
  const double mi_x2 = mutual_information(table, {"X1"}, {"X2"});
  CheckReport r;
  r.check = "pi_keeps_x1_information";
  r.trials = 1;
  r.max_violation = std::fabs(mi_pi - mi_x2);
  r.extra["mi_x1_pi"] = mi_pi;
  r.extra["mi_x1_x2"] = mi_x2;
  return r;
}

namespace {

CheckReport pi_dominates_x1(const JointTable& table, std::string name) {
  const PiVariable pv = pi_as_variable(table);
  const double mi_pi_y = mutual_information(pv.joint, {"Pi"}, {"Y"});
  const double mi_x1_y = mutual_information(table, {"X1"}, {"Y"});
  CheckReport r;
  r.check = std::move(name);
  r.trials = 1;
  r.max_violation = std::max(0.0, mi_x1_y - mi_pi_y);
  r.extra["mi_pi_y"] = mi_pi_y;
  r.extra["mi_x1_y"] = mi_x1_y;
  return r;
}

}  // namespace

CheckReport check_pi_beats_x1(const JointTable& table) {
  const std::size_t y[] = {table.axis("Y")}, x2[] = {table.axis("X2")};
  if (conditional_entropy(table, y, x2) >= 1e-9)
    throw InvalidArgument("table violates the deterministic-label assumption (H(Y|X2) > 0)");
  return pi_dominates_x1(table, "pi_beats_x1");
}

CheckReport check_causal_pi_beats_x1(const GraphModel& model) {
  if (model.kind() != GraphKind::kCausal) throw InvalidArgument("causal check needs a causal model");
  return pi_dominates_x1(model.observable(), "causal_pi_beats_x1");
}

std::vector<double> recover_posterior_anticausal(const Matrix& m, std::span<const double> pi_row) {
  if (m.rows < m.cols) throw SingularRecovery("P(X1|Y) has fewer rows than columns");
  if (pi_row.size() != m.rows) throw InvalidArgument("pi row length does not match P(X1|Y)");
  Eigen::MatrixXd a(m.rows, m.cols);
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c) a(r, c) = m(r, c);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(sv.size() - 1) / sv(0) <= kRecoveryConditionThreshold)
    throw SingularRecovery("P(X1|Y) columns are not linearly independent");
  Eigen::VectorXd b(m.rows);
  for (std::size_t r = 0; r < m.rows; ++r) b(r) = pi_row[r];
  const Eigen::VectorXd q = svd.solve(b);
  std::vector<double> out(m.cols);
  double total = 0.0;
  for (std::size_t c = 0; c < m.cols; ++c) {
    out[c] = std::clamp(q(c), 0.0, 1.0);
    total += out[c];
  }
  if (!(total > 0.0)) throw SingularRecovery("recovered posterior vanished after clamping");
  for (double& x : out) x /= total;
  return out;
}

CheckReport check_anticausal_pi_matches_x2(const GraphModel& model) {
  if (model.kind() != GraphKind::kAnticausal) throw InvalidArgument("anticausal check needs an anticausal model");
  const Conditional& comp = model.component("X1");
  const Matrix m{comp.child_size, comp.parent_configs, comp.table};

  const JointTable& obs = model.observable();
  const std::size_t ax1 = obs.axis("X1"), ax2 = obs.axis("X2"), ay = obs.axis("Y");
  const std::size_t ctx[] = {ax2};
  const PiTable pi = compute_pi(obs, ax1, ctx);
  const PiTable post = compute_pi(obs, ay, ctx);
  double rec_err = 0.0;
  for (std::size_t x2 = 0; x2 < pi.num_rows(); ++x2) {
    if (!pi.defined[x2]) continue;
    const auto q = recover_posterior_anticausal(m, pi.rows[x2]);
    for (std::size_t y = 0; y < q.size(); ++y) rec_err = std::max(rec_err, std::fabs(q[y] - post.rows[x2][y]));
  }

  const std::size_t keep[] = {ay};
  const PiVariable pv = induce_pi(obs, ax1, ctx, keep);
  const double mi_pi_y = mutual_information(pv.joint, {"Pi"}, {"Y"});
  const double mi_x2_y = mutual_information(obs, {"X2"}, {"Y"});
  CheckReport r;
  r.check = "anticausal_pi_matches_x2";
  r.trials = 1;
  r.max_violation = std::fabs(mi_pi_y - mi_x2_y);
  r.extra["recovery_error"] = rec_err;
  r.extra["mi_pi_y"] = mi_pi_y;
  r.extra["mi_x2_y"] = mi_x2_y;
  return r;
}

PiFeature pi_per_feature(const JointTable& table, std::size_t feature) {
  if (table.rank() < 3) throw InvalidArgument("need at least two features and a label");
  const std::size_t label = table.rank() - 1;
  if (feature >= label) throw InvalidArgument("feature index out of range");
  std::vector<std::size_t> ctx;
  for (std::size_t a = 0; a < label; ++a)
    if (a != feature) ctx.push_back(a);
  const std::size_t keep[] = {label};
  PiFeature out;
  out.pi = compute_pi(table, feature, ctx);
  const PiVariable pv = induce_pi(table, feature, ctx, keep);
  out.num_states = pv.states.size();
  const std::size_t pi_axis[] = {0}, y_axis[] = {1};
  out.mi_with_label = mutual_information(pv.joint, pi_axis, y_axis);
  return out;
}

// --- sweeps -------------------------------------------------------------------

namespace {

enum SweepTag : std::uint64_t { kKeepsX1 = 1, kBeatsX1 = 2, kCausal = 3, kAnticausal = 4, kPiSearch = 5 };

std::size_t between(Stream& s, std::size_t lo, std::size_t hi) { return lo + s.index(hi - lo + 1); }

}  // namespace

JointTable random_joint_table(Stream& stream, double concentration) {
  const std::size_t n1 = between(stream, 2, 4), n2 = between(stream, 2, 8), ny = between(stream, 2, 3);
  return JointTable::from_weights({"X1", "X2", "Y"}, {n1, n2, ny}, stream.dirichlet(n1 * n2 * ny, concentration));
}

JointTable random_deterministic_label_table(Stream& stream, double concentration) {
  const std::size_t n1 = between(stream, 2, 4), n2 = between(stream, 2, 8), ny = between(stream, 2, 3);
  const auto p12 = stream.dirichlet(n1 * n2, concentration);
  std::vector<std::size_t> f(n2);
  for (auto& v : f) v = stream.index(ny);
  std::vector<double> w(n1 * n2 * ny, 0.0);
  for (std::size_t a = 0; a < n1; ++a)
    for (std::size_t b = 0; b < n2; ++b) w[(a * n2 + b) * ny + f[b]] = p12[a * n2 + b];
  return JointTable::from_weights({"X1", "X2", "Y"}, {n1, n2, ny}, std::move(w));
}

GraphModel random_well_conditioned_anticausal(Stream& stream, double concentration, std::size_t* redraws) {
  for (;;) {
    GraphSizes s;
    s.y = between(stream, 2, 3);
    s.x1 = between(stream, s.y, 4);
    s.z = between(stream, 2, 4);
    s.q = between(stream, 2, 4);
    s.x2 = between(stream, 2, 6);
    GraphModel model = random_graph_model(GraphKind::kAnticausal, s, stream, concentration);
    const Conditional& c = model.component("X1");
    Eigen::MatrixXd a(c.child_size, c.parent_configs);
    for (std::size_t r = 0; r < c.child_size; ++r)
      for (std::size_t k = 0; k < c.parent_configs; ++k) a(r, k) = c.at(r, k);
    const auto sv = Eigen::JacobiSVD<Eigen::MatrixXd>(a).singularValues();
    if (sv(sv.size() - 1) / sv(0) > kRecoveryConditionThreshold) return model;
    if (redraws != nullptr) ++*redraws;
  }
}

CheckReport sweep_pi_keeps_x1_information(const SweepOptions& opts) {
  CheckReport r;
  r.check = "pi_keeps_x1_information";
  for (std::size_t t = 0; t < opts.trials; ++t) {
    Stream s = Stream::derive(opts.master_seed, kKeepsX1, t);
    r.record(check_pi_keeps_x1_information(random_joint_table(s, opts.concentration)).max_violation, t, 1e-9);
  }
  return r;
}

CheckReport sweep_pi_beats_x1(const SweepOptions& opts) {
  CheckReport r;
  r.check = "pi_beats_x1";
  for (std::size_t t = 0; t < opts.trials; ++t) {
    Stream s = Stream::derive(opts.master_seed, kBeatsX1, t);
    r.record(check_pi_beats_x1(random_deterministic_label_table(s, opts.concentration)).max_violation, t, 1e-9);
  }
  return r;
}

CheckReport sweep_causal_pi_beats_x1(const SweepOptions& opts) {
  CheckReport r;
  r.check = "causal_pi_beats_x1";
  for (std::size_t t = 0; t < opts.trials; ++t) {
    Stream s = Stream::derive(opts.master_seed, kCausal, t);
    GraphSizes sz;
    sz.z = between(s, 2, 4);
    sz.x1 = between(s, 2, 4);
    sz.x2 = between(s, 2, 6);
    sz.y = between(s, 2, 3);
    r.record(check_causal_pi_beats_x1(random_graph_model(GraphKind::kCausal, sz, s, opts.concentration)).max_violation, t,
             1e-9);
  }
  return r;
}

CheckReport sweep_anticausal_pi_matches_x2(const SweepOptions& opts) {
  CheckReport r;
  r.check = "anticausal_pi_matches_x2";
  std::size_t redraws = 0;
  double rec = 0.0;
  for (std::size_t t = 0; t < opts.trials; ++t) {
    Stream s = Stream::derive(opts.master_seed, kAnticausal, t);
    const CheckReport one = check_anticausal_pi_matches_x2(random_well_conditioned_anticausal(s, opts.concentration, &redraws));
    const double e = one.extra.at("recovery_error");
    rec = std::max(rec, e);
    r.record(one.max_violation, t, 1e-9);
    if (e > 1e-6 && (r.failing_seeds.empty() || r.failing_seeds.back() != t)) r.failing_seeds.push_back(t);
  }
  r.extra["recovery_error"] = rec;
  r.extra["singular_redraws"] = static_cast<double>(redraws);
  return r;
}

CounterexampleResult find_pi_ordering_counterexample(std::size_t max_draws, std::uint64_t master_seed,
                                                     double concentration) {
  CounterexampleResult out;
  for (std::size_t t = 0; t < max_draws; ++t) {
    Stream s = Stream::derive(master_seed, kPiSearch, t);
    const GraphModel model = random_graph_model(GraphKind::kThreeFeature, GraphSizes{}, s, concentration);
    const double mi1 = pi_per_feature(model.observable(), 0).mi_with_label;
    const double mi3 = pi_per_feature(model.observable(), 2).mi_with_label;
    out.draws = t + 1;
    if (mi3 > mi1 + 1e-9) {
      out = {true, t, t + 1, mi1, mi3};
      return out;
    }
  }
  return out;
}

}  // namespace spur
