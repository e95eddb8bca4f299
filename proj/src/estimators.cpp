#include "spur/estimators.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "spur/errors.hpp"
#include "spur/infotheory.hpp"
#include "spur/parallel.hpp"

namespace spur {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// sum_y p(y) ln(p(y) / q(y))
double kl_nats(std::span<const double> p, std::span<const double> q) {
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return kInf;
    d += p[i] * std::log(p[i] / q[i]);
  }
  return d;
}

// Plug-in weights from a prior and per-label X1 profiles.
std::vector<std::vector<double>> plug_in_weights(const std::vector<double>& prior,
                                                 const std::vector<std::vector<double>>& x1_given_y) {
  const std::size_t n_y = prior.size(), n_x1 = x1_given_y.front().size();
  std::vector<std::vector<double>> w(n_y, std::vector<double>(n_x1, 0.0));
  for (std::size_t x = 0; x < n_x1; ++x) {
    double denom = 0.0;
    for (std::size_t y = 0; y < n_y; ++y) denom += x1_given_y[y][x] * prior[y];
    for (std::size_t y = 0; y < n_y; ++y) w[y][x] = denom > 0.0 ? x1_given_y[y][x] * prior[y] / denom : prior[y];
  }
  return w;
}

struct TableView {
  std::size_t n1, n2, ny;
  std::size_t a1, a2, ay;
};

TableView view(const JointTable& t) {
  const std::size_t a1 = t.axis("X1"), a2 = t.axis("X2"), ay = t.axis("Y");
  if (t.rank() != 3) throw InvalidArgument("expected a table over (X1, X2, Y)");
  return {t.size(a1), t.size(a2), t.size(ay), a1, a2, ay};
}

double cell(const JointTable& t, const TableView& v, std::size_t x1, std::size_t x2, std::size_t y) {
  std::size_t o[3];
  o[v.a1] = x1;
  o[v.a2] = x2;
  o[v.ay] = y;
  return t.prob(o);
}

}  // namespace

std::vector<double> PiClassifier::predict(std::span<const double> pi) const {
  std::vector<double> out(weights.size(), 0.0);
  for (std::size_t y = 0; y < weights.size(); ++y)
    for (std::size_t x = 0; x < pi.size(); ++x) out[y] += weights[y][x] * pi[x];
  return out;
}

CountClassifier fit_count_classifier(std::span<const LabeledIndex> samples, std::size_t n_x1, std::size_t n_y) {
  if (samples.empty()) throw InvalidArgument("empty sample set");
  std::vector<std::vector<double>> counts(n_x1, std::vector<double>(n_y, 0.0));
  std::vector<double> label_counts(n_y, 0.0);
  for (const auto& s : samples) {
    if (s.x1 >= n_x1 || s.y >= n_y) throw InvalidArgument("sample out of range");
    counts[s.x1][s.y] += 1.0;
    label_counts[s.y] += 1.0;
  }
  CountClassifier h;
  h.prior.resize(n_y);
  for (std::size_t y = 0; y < n_y; ++y) h.prior[y] = label_counts[y] / static_cast<double>(samples.size());
  h.table.resize(n_x1);
  h.seen.assign(n_x1, false);
  for (std::size_t x = 0; x < n_x1; ++x) {
    const double total = std::accumulate(counts[x].begin(), counts[x].end(), 0.0);
    if (total > 0.0) {
      h.seen[x] = true;
      h.table[x].resize(n_y);
      for (std::size_t y = 0; y < n_y; ++y) h.table[x][y] = counts[x][y] / total;
    } else {
      h.table[x] = h.prior;
    }
  }
  return h;
}

PiClassifier fit_pi_classifier(std::span<const LabeledPi> samples, std::size_t n_y,
                               std::optional<std::vector<double>> known_prior) {
  if (samples.empty()) throw InvalidArgument("empty sample set");
  const std::size_t n_x1 = samples.front().pi.size();
  if (n_x1 == 0) throw InvalidArgument("empty pi vector");
  std::vector<std::vector<double>> sums(n_y, std::vector<double>(n_x1, 0.0));
  std::vector<double> counts(n_y, 0.0);
  for (const auto& s : samples) {
    if (s.pi.size() != n_x1 || s.y >= n_y) throw InvalidArgument("sample out of range");
    double total = 0.0;
    for (double p : s.pi) {
      if (!(p >= 0.0)) throw InvalidArgument("pi is not a probability vector");
      total += p;
    }
    if (std::fabs(total - 1.0) > 1e-9) throw InvalidArgument("pi is not a probability vector");
    for (std::size_t x = 0; x < n_x1; ++x) sums[s.y][x] += s.pi[x];
    counts[s.y] += 1.0;
  }
  PiClassifier h;
  if (known_prior) {
    if (known_prior->size() != n_y) throw InvalidArgument("prior has the wrong length");
    h.prior = *known_prior;
    h.known_prior = true;
  } else {
    h.prior.resize(n_y);
    for (std::size_t y = 0; y < n_y; ++y) h.prior[y] = counts[y] / static_cast<double>(samples.size());
  }
  h.x1_given_y.resize(n_y);
  h.label_observed.assign(n_y, false);
  for (std::size_t y = 0; y < n_y; ++y) {
    if (counts[y] > 0.0) {
      h.label_observed[y] = true;
      h.x1_given_y[y].resize(n_x1);
      for (std::size_t x = 0; x < n_x1; ++x) h.x1_given_y[y][x] = sums[y][x] / counts[y];
    } else {
      h.x1_given_y[y].assign(n_x1, 1.0 / static_cast<double>(n_x1));
    }
  }
  h.weights = plug_in_weights(h.prior, h.x1_given_y);
  return h;
}

CountClassifier limit_count_classifier(const JointTable& table) {
  const TableView v = view(table);
  CountClassifier h;
  h.prior = marginal(table, v.ay);
  h.table.assign(v.n1, std::vector<double>(v.ny, 0.0));
  h.seen.assign(v.n1, false);
  for (std::size_t x1 = 0; x1 < v.n1; ++x1) {
    double total = 0.0;
    for (std::size_t x2 = 0; x2 < v.n2; ++x2)
      for (std::size_t y = 0; y < v.ny; ++y) {
        const double p = cell(table, v, x1, x2, y);
        h.table[x1][y] += p;
        total += p;
      }
    if (total > 0.0) {
      h.seen[x1] = true;
      for (double& p : h.table[x1]) p /= total;
    } else {
      h.table[x1] = h.prior;
    }
  }
  return h;
}

PiClassifier limit_pi_classifier(const JointTable& table) {
  const TableView v = view(table);
  const std::size_t ctx[] = {v.a2};
  const PiTable pi = compute_pi(table, v.a1, ctx);
  PiClassifier h;
  h.prior = marginal(table, v.ay);
  h.known_prior = true;
  h.x1_given_y.assign(v.ny, std::vector<double>(v.n1, 0.0));
  h.label_observed.assign(v.ny, false);
  // E[pi | y] = sum_x2 P(x2 | y) P(X1 | x2)
  for (std::size_t y = 0; y < v.ny; ++y) {
    if (!(h.prior[y] > 0.0)) {
      h.x1_given_y[y].assign(v.n1, 1.0 / static_cast<double>(v.n1));
      continue;
    }
    h.label_observed[y] = true;
    for (std::size_t x2 = 0; x2 < v.n2; ++x2) {
      if (!pi.defined[x2]) continue;
      double p_x2_y = 0.0;
      for (std::size_t x1 = 0; x1 < v.n1; ++x1) p_x2_y += cell(table, v, x1, x2, y);
      for (std::size_t x1 = 0; x1 < v.n1; ++x1) h.x1_given_y[y][x1] += p_x2_y / h.prior[y] * pi.rows[x2][x1];
    }
  }
  h.weights = plug_in_weights(h.prior, h.x1_given_y);
  return h;
}

namespace {

// Calls fn(x1, x2, P(x1, x2), P(Y | x1, x2)) for each positive-probability (x1, x2).
template <typename Fn>
void for_each_input(const JointTable& table, const TableView& v, Fn&& fn) {
  std::vector<double> post(v.ny);
  for (std::size_t x1 = 0; x1 < v.n1; ++x1)
    for (std::size_t x2 = 0; x2 < v.n2; ++x2) {
      double mass = 0.0;
      for (std::size_t y = 0; y < v.ny; ++y) mass += (post[y] = cell(table, v, x1, x2, y));
      if (!(mass > 0.0)) continue;
      for (double& p : post) p /= mass;
      fn(x1, x2, mass, std::span<const double>(post));
    }
}

}  // namespace

double expected_divergence(const JointTable& table, const CountClassifier& h) {
  const TableView v = view(table);
  double d = 0.0;
  for_each_input(table, v, [&](std::size_t x1, std::size_t, double mass, std::span<const double> post) {
    d += mass * kl_nats(post, h.predict(x1));
  });
  return d;
}

double expected_divergence(const JointTable& table, const PiClassifier& h) {
  const TableView v = view(table);
  const std::size_t ctx[] = {v.a2};
  const PiTable pi = compute_pi(table, v.a1, ctx);
  double d = 0.0;
  for_each_input(table, v, [&](std::size_t, std::size_t x2, double mass, std::span<const double> post) {
    d += mass * kl_nats(post, h.predict(pi.rows[x2]));
  });
  return d;
}

std::vector<double> convexity_gaps(const JointTable& table) {
  const TableView v = view(table);
  const std::size_t ctx2[] = {v.a2}, ctx1[] = {v.a1};
  const PiTable x1_given_x2 = compute_pi(table, v.a1, ctx2);
  const PiTable y_given_x2 = compute_pi(table, v.ay, ctx2);
  const PiTable y_given_x1 = compute_pi(table, v.ay, ctx1);
  std::vector<double> gaps(v.n2, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t x2 = 0; x2 < v.n2; ++x2) {
    if (!x1_given_x2.defined[x2]) continue;
    const auto& target = y_given_x2.rows[x2];
    double lhs = 0.0;
    std::vector<double> mix(v.ny, 0.0);
    for (std::size_t x1 = 0; x1 < v.n1; ++x1) {
      const double w = x1_given_x2.rows[x2][x1];
      if (w <= 0.0) continue;
      lhs += w * kl_nats(target, y_given_x1.rows[x1]);
      for (std::size_t y = 0; y < v.ny; ++y) mix[y] += w * y_given_x1.rows[x1][y];
    }
    gaps[x2] = std::isinf(lhs) ? kInf : lhs - kl_nats(target, mix);
  }
  return gaps;
}

RateFit fit_loglog(std::string learner, std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lx = std::log10(x[i]), ly = std::log10(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    syy += ly * ly;
  }
  const double dn = static_cast<double>(n);
  const double cov = sxy - sx * sy / dn, varx = sxx - sx * sx / dn, vary = syy - sy * sy / dn;
  RateFit f{std::move(learner), cov / varx, 0.0, 0.0};
  f.intercept = (sy - f.slope * sx) / dn;
  f.r2 = vary > 0.0 ? cov * cov / (varx * vary) : 1.0;
  return f;
}

RateReport convergence_experiment(const JointTable& table, const RateOptions& opts) {
  const auto& grid = opts.n_grid;
  if (grid.size() < 4) throw InvalidArgument("insufficient n grid: need at least 4 points");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (grid[i] <= grid[i - 1]) throw InvalidArgument("n grid must be strictly increasing");
  if (grid.front() == 0 || static_cast<double>(grid.back()) < 100.0 * static_cast<double>(grid.front()))
    throw InvalidArgument("n grid must span at least two decades");
  if (opts.seeds_per_n == 0) throw InvalidArgument("need at least one seed per n");

  const TableView v = view(table);
  const CountClassifier count_limit = limit_count_classifier(table);
  const PiClassifier pi_limit = limit_pi_classifier(table);
  const std::size_t ctx[] = {v.a2};
  const PiTable pi = compute_pi(table, v.a1, ctx);
  const std::vector<double> p_x1 = marginal(table, v.a1), p_x2 = marginal(table, v.a2);
  std::optional<std::vector<double>> known;
  if (opts.prior_mode == PriorMode::kKnown) known = marginal(table, v.ay);

  const Sampler sampler(table);
  const std::size_t cells = grid.size() * opts.seeds_per_n;
  std::vector<double> err_count(cells), err_pi(cells);
  parallel_for(cells, opts.workers, [&](std::size_t c) {
    const std::size_t gi = c / opts.seeds_per_n, seed = c % opts.seeds_per_n;
    Stream stream = Stream::derive(opts.master_seed, gi, seed);
    const std::size_t n = grid[gi];
    std::vector<LabeledIndex> xs;
    std::vector<LabeledPi> ps;
    xs.reserve(n);
    ps.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto o = table.outcome(sampler.draw_cell(stream));
      xs.push_back({o[v.a1], o[v.ay]});
      ps.push_back({pi.rows[o[v.a2]], o[v.ay]});
    }
    const CountClassifier hc = fit_count_classifier(xs, v.n1, v.ny);
    const PiClassifier hp = fit_pi_classifier(ps, v.ny, known);
    double ec = 0.0, ep = 0.0;
    for (std::size_t x1 = 0; x1 < v.n1; ++x1)
      for (std::size_t y = 0; y < v.ny; ++y) {
        const double d = hc.table[x1][y] - count_limit.table[x1][y];
        ec += p_x1[x1] * d * d;
      }
    for (std::size_t x2 = 0; x2 < v.n2; ++x2) {
      if (!pi.defined[x2]) continue;
      const auto a = hp.predict(pi.rows[x2]), b = pi_limit.predict(pi.rows[x2]);
      for (std::size_t y = 0; y < v.ny; ++y) ep += p_x2[x2] * (a[y] - b[y]) * (a[y] - b[y]);
    }
    err_count[c] = ec;
    err_pi[c] = ep;
  });

  RateReport report;
  std::vector<double> ns, mean_c, mean_p;
  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    double stats[2][2] = {{0, 0}, {0, 0}};
    const std::size_t k = opts.seeds_per_n;
    for (std::size_t s = 0; s < k; ++s) {
      const std::size_t c = gi * k + s;
      stats[0][0] += err_count[c];
      stats[0][1] += err_count[c] * err_count[c];
      stats[1][0] += err_pi[c];
      stats[1][1] += err_pi[c] * err_pi[c];
    }
    double mean[2], se[2];
    for (int l = 0; l < 2; ++l) {
      const double dk = static_cast<double>(k);
      mean[l] = stats[l][0] / dk;
      const double var = k > 1 ? std::max(0.0, (stats[l][1] - dk * mean[l] * mean[l]) / (dk - 1.0)) : 0.0;
      se[l] = std::sqrt(var / dk);
    }
    report.rows.push_back({grid[gi], "count", mean[0], se[0], k});
    report.rows.push_back({grid[gi], "pi", mean[1], se[1], k});
    report.pi_not_worse.push_back(mean[1] <= mean[0] + 2.0 * se[0]);
    ns.push_back(static_cast<double>(grid[gi]));
    mean_c.push_back(mean[0]);
    mean_p.push_back(mean[1]);
  }
  report.fits.push_back(fit_loglog("count", ns, mean_c));
  report.fits.push_back(fit_loglog("pi", ns, mean_p));
  report.divergence_count_limit = expected_divergence(table, count_limit);
  report.divergence_pi_limit = expected_divergence(table, pi_limit);
  return report;
}

std::string RateReport::to_csv() const {
  std::ostringstream out;
  out << "n,learner,mean_sq_error,std_error,seeds\n";
  char buf[64];
  for (const auto& r : rows) {
    out << r.n << ',' << r.learner << ',';
    std::snprintf(buf, sizeof buf, "%.10e", r.mean_sq_error);
    out << buf << ',';
    std::snprintf(buf, sizeof buf, "%.10e", r.std_error);
    out << buf << ',' << r.seeds << '\n';
  }
  return out.str();
}

nlohmann::json RateReport::summary() const {
  nlohmann::json fits_json = nlohmann::json::array();
  for (const auto& f : fits)
    fits_json.push_back({{"learner", f.learner}, {"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2}});
  return {{"fits", fits_json},
          {"divergence_count_limit_nats", divergence_count_limit},
          {"divergence_pi_limit_nats", divergence_pi_limit},
          {"pi_not_worse_per_n", pi_not_worse}};
}

}  // namespace spur
