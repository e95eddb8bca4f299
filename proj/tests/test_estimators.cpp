#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "spur/errors.hpp"
#include "spur/estimators.hpp"
#include "spur/infotheory.hpp"

using namespace spur;

namespace {

// P(y | x1) straight from the table cells.
std::vector<std::vector<double>> y_given_x1(const JointTable& t) {
  const std::size_t n1 = t.size(0), n2 = t.size(1), ny = t.size(2);
  std::vector<std::vector<double>> out(n1, std::vector<double>(ny, 0.0));
  for (std::size_t a = 0; a < n1; ++a) {
    double tot = 0.0;
    for (std::size_t b = 0; b < n2; ++b)
      for (std::size_t y = 0; y < ny; ++y) {
        const double p = t.prob(std::vector<std::size_t>{a, b, y});
        out[a][y] += p;
        tot += p;
      }
    for (double& v : out[a]) v = tot > 0 ? v / tot : 0.0;
  }
  return out;
}

// Brute-force E_{x1,x2} KL(P(Y|x1,x2) || q(x1,x2)) in nats.
template <typename Q>
double divergence_oracle(const JointTable& t, Q q) {
  const std::size_t n1 = t.size(0), n2 = t.size(1), ny = t.size(2);
  double d = 0.0;
  for (std::size_t a = 0; a < n1; ++a)
    for (std::size_t b = 0; b < n2; ++b) {
      double pab = 0.0;
      for (std::size_t y = 0; y < ny; ++y) pab += t.prob(std::vector<std::size_t>{a, b, y});
      if (pab <= 0.0) continue;
      const std::vector<double> h = q(a, b);
      for (std::size_t y = 0; y < ny; ++y) {
        const double p = t.prob(std::vector<std::size_t>{a, b, y}) / pab;
        if (p > 0.0) d += pab * p * std::log(p / h[y]);
      }
    }
  return d;
}

}  // namespace

TEST_CASE("count classifier tallies co-occurrences") {
  const std::vector<LabeledIndex> s{{0, 0}, {0, 1}, {0, 1}, {2, 0}};
  const CountClassifier h = fit_count_classifier(s, 3, 2);
  CHECK(h.predict(0)[1] == doctest::Approx(2.0 / 3.0));
  CHECK(h.seen[0]);
  CHECK_FALSE(h.seen[1]);
  CHECK(h.predict(1) == h.prior);
  CHECK(h.prior[0] == doctest::Approx(0.5));
  CHECK_THROWS_AS(fit_count_classifier({}, 3, 2), InvalidArgument);
  const std::vector<LabeledIndex> bad{{3, 0}};
  CHECK_THROWS_AS(fit_count_classifier(bad, 3, 2), InvalidArgument);
}

TEST_CASE("pi classifier on one-hot inputs reduces to counting") {
  Stream s(1);
  std::vector<LabeledIndex> idx;
  std::vector<LabeledPi> pis;
  for (int i = 0; i < 500; ++i) {
    const std::size_t x = s.index(3), y = s.uniform() < 0.3 + 0.2 * x ? 1 : 0;
    idx.push_back({x, y});
    std::vector<double> one(3, 0.0);
    one[x] = 1.0;
    pis.push_back({one, y});
  }
  const CountClassifier c = fit_count_classifier(idx, 3, 2);
  const PiClassifier p = fit_pi_classifier(pis, 2, c.prior);
  for (std::size_t x = 0; x < 3; ++x) {
    std::vector<double> one(3, 0.0);
    one[x] = 1.0;
    const auto h = p.predict(one);
    for (std::size_t y = 0; y < 2; ++y) CHECK(h[y] == doctest::Approx(c.predict(x)[y]).epsilon(1e-12));
  }
  const std::vector<LabeledPi> bad{{{0.5, 0.6}, 0}};
  CHECK_THROWS_AS(fit_pi_classifier(bad, 2), InvalidArgument);
}

TEST_CASE("limit classifiers on the toy table") {
  const JointTable t = build_toy(ToyConfig(100, 0.25));
  const CountClassifier c = limit_count_classifier(t);
  const auto want = y_given_x1(t);
  for (std::size_t x = 0; x < 2; ++x)
    for (std::size_t y = 0; y < 2; ++y) CHECK(c.predict(x)[y] == doctest::Approx(want[x][y]).epsilon(1e-12));

  const PiClassifier p = limit_pi_classifier(t);
  // Half of X2 lies in the zone, so P(X1 = y | y) = 0.75 and the linear
  // Pi rule maps Pi = (1, 0) to P(y = 0) = 0.75.
  const double pure0[] = {1.0, 0.0};
  CHECK(p.predict(pure0)[0] == doctest::Approx(0.75).epsilon(1e-12));

  const PiTable pi = compute_pi(t);
  const double dc = divergence_oracle(t, [&](std::size_t a, std::size_t) { return c.predict(a); });
  const double dp = divergence_oracle(t, [&](std::size_t, std::size_t b) { return p.predict(pi.rows[b]); });
  CHECK(expected_divergence(t, c) == doctest::Approx(dc).epsilon(1e-12));
  CHECK(expected_divergence(t, p) == doctest::Approx(dp).epsilon(1e-12));
  CHECK(expected_divergence(t, p) <= expected_divergence(t, c));
}

TEST_CASE("pi limit divergence never exceeds count limit divergence") {
  Stream s(77);
  int tested = 0;
  for (int i = 0; i < 1000; ++i) {
    const JointTable t = random_deterministic_label_table(s);
    const double dc = expected_divergence(t, limit_count_classifier(t));
    const double dp = expected_divergence(t, limit_pi_classifier(t));
    if (!std::isfinite(dc)) continue;
    ++tested;
    CHECK(dp <= dc + 1e-12);
  }
  CHECK(tested > 900);
}

TEST_CASE("convexity gaps are nonnegative") {
  Stream s(31);
  for (int i = 0; i < 300; ++i)
    for (double g : convexity_gaps(random_joint_table(s)))
      if (std::isfinite(g)) CHECK(g >= -1e-12);
}

TEST_CASE("log-log fit recovers an exact power law") {
  const double x[] = {10, 100, 1000, 10000};
  double y[4];
  for (int i = 0; i < 4; ++i) y[i] = 3.0 * std::pow(x[i], -1.0);
  const RateFit f = fit_loglog("t", x, y);
  CHECK(f.slope == doctest::Approx(-1.0));
  CHECK(f.intercept == doctest::Approx(std::log10(3.0)));
  CHECK(f.r2 == doctest::Approx(1.0));
}

TEST_CASE("convergence experiment validates its grid and is deterministic") {
  const JointTable t = build_toy(ToyConfig(50, 0.25));
  RateOptions o;
  o.seeds_per_n = 5;
  o.n_grid = {100, 1000};
  CHECK_THROWS_AS(convergence_experiment(t, o), InvalidArgument);
  o.n_grid = {100, 200, 300, 400};
  CHECK_THROWS_AS(convergence_experiment(t, o), InvalidArgument);
  o.n_grid = {100, 50, 1000, 10000};
  CHECK_THROWS_AS(convergence_experiment(t, o), InvalidArgument);

  o.n_grid = {100, 300, 1000, 10000};
  o.master_seed = 4;
  o.workers = 1;
  const RateReport a = convergence_experiment(t, o);
  o.workers = 3;
  const RateReport b = convergence_experiment(t, o);
  CHECK(a.to_csv() == b.to_csv());
  CHECK(a.rows.size() == 8);
  CHECK(a.to_csv().rfind("n,learner,mean_sq_error,std_error,seeds\n", 0) == 0);
}
