#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "spur/errors.hpp"
#include "spur/infotheory.hpp"

using namespace spur;

namespace {

JointTable random_table(Stream& s, std::vector<std::size_t> sizes) {
  std::size_t n = 1;
  for (auto k : sizes) n *= k;
  std::vector<double> w(n);
  for (double& x : w) x = s.uniform() < 0.2 ? 0.0 : s.uniform();
  w[0] += 0.1;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < sizes.size(); ++i) names.push_back("V" + std::to_string(i));
  return JointTable::from_weights(names, sizes, w);
}

}  // namespace

TEST_CASE("entropy of simple distributions") {
  const double u4[] = {0.25, 0.25, 0.25, 0.25};
  const double point[] = {0.0, 1.0, 0.0};
  CHECK(entropy(u4) == doctest::Approx(2.0));
  CHECK(entropy(point) == 0.0);
  const double coin[] = {0.25, 0.75};
  CHECK(entropy(coin) == doctest::Approx(oracle::h2(0.25)));
}

TEST_CASE("mutual information agrees with brute-force aggregation") {
  Stream s(3);
  for (std::size_t trial = 0; trial < 50; ++trial) {
    const JointTable t = random_table(s, {2 + trial % 3, 3, 2 + trial % 2});
    const std::size_t a[] = {0}, b[] = {1}, c[] = {2}, bc[] = {1, 2};
    CHECK(mutual_information(t, a, b) == doctest::Approx(oracle::mi(t, {0}, {1})).epsilon(1e-12));
    CHECK(mutual_information(t, a, b, c) == doctest::Approx(oracle::mi(t, {0}, {1}, {2})).epsilon(1e-12));
    // Chain rule.
    CHECK(mutual_information(t, a, bc) ==
          doctest::Approx(mutual_information(t, a, c) + mutual_information(t, a, b, c)).epsilon(1e-12));
    CHECK(conditional_entropy(t, a, b) == doctest::Approx(oracle::entropy(t, {0, 1}) - oracle::entropy(t, {1})));
  }
}

TEST_CASE("mutual information rejects overlapping axis sets") {
  const JointTable t = JointTable::from_weights({"A", "B"}, {2, 2}, {1, 2, 3, 4});
  const std::size_t a[] = {0};
  CHECK_THROWS_AS(mutual_information(t, a, a), InvalidArgument);
  CHECK_THROWS_AS(mutual_information(t, {"A"}, {"Q"}), InvalidArgument);
}

TEST_CASE("toy exact information values") {
  const JointTable t = build_toy(ToyConfig(100, 0.25));
  CHECK(mutual_information(t, {"X1"}, {"Y"}) == doctest::Approx(1.0 - oracle::h2(0.25)).epsilon(1e-12));
  CHECK(std::abs(mutual_information(t, {"X1"}, {"Y"}) - 0.1887219) < 1e-6);
  const std::size_t x1[] = {0}, x2[] = {1};
  CHECK(std::abs(conditional_entropy(t, x1, x2) - 0.5) < 1e-9);
  const PiVariable pi = pi_as_variable(t);
  CHECK(pi.states.size() == 3);
  CHECK(std::abs(mutual_information(pi.joint, {"Pi"}, {"Y"}) - 0.5) < 1e-9);
  // Pi's three states: (1,0), (0.5,0.5), (0,1).
  for (const auto& row : pi.states) CHECK(row[0] + row[1] == doctest::Approx(1.0));
}

TEST_CASE("pi rows are conditional distributions") {
  Stream s(5);
  const JointTable t = random_table(s, {3, 4, 2});
  const std::size_t ctx[] = {1};
  const PiTable pi = compute_pi(t, 0, ctx);
  for (std::size_t r = 0; r < pi.num_rows(); ++r) {
    if (!pi.defined[r]) continue;
    double px2 = 0.0;
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t y = 0; y < 2; ++y) px2 += t.prob(std::vector<std::size_t>{a, r, y});
    for (std::size_t a = 0; a < 3; ++a) {
      double joint = 0.0;
      for (std::size_t y = 0; y < 2; ++y) joint += t.prob(std::vector<std::size_t>{a, r, y});
      CHECK(pi.rows[r][a] == doctest::Approx(joint / px2).epsilon(1e-12));
    }
  }
}

TEST_CASE("pi information checks on individual tables") {
  Stream s(9);
  for (int i = 0; i < 200; ++i) {
    const JointTable t = random_joint_table(s);
    CHECK(check_pi_keeps_x1_information(t).max_violation <= 1e-9);
    const JointTable d = random_deterministic_label_table(s);
    CHECK(check_pi_beats_x1(d).max_violation <= 1e-9);
  }
  const JointTable noisy = JointTable::from_weights({"X1", "X2", "Y"}, {2, 2, 2}, {1, 1, 1, 1, 1, 1, 1, 1});
  CHECK_THROWS_AS(check_pi_beats_x1(noisy), InvalidArgument);
}

TEST_CASE("causal check reports the exact information gap") {
  Stream s(21);
  for (int i = 0; i < 50; ++i) {
    const GraphModel m = random_graph_model(GraphKind::kCausal, GraphSizes{}, s);
    const JointTable& obs = m.observable();
    const PiVariable pi = pi_as_variable(obs);
    const double gap = oracle::mi(obs, {0}, {2}) - oracle::mi(pi.joint, {0}, {2});
    CHECK(check_causal_pi_beats_x1(m).max_violation == doctest::Approx(std::max(0.0, gap)).epsilon(1e-9));
  }
}

TEST_CASE("graph models factorize as declared") {
  Stream s(4);
  const GraphModel m = random_graph_model(GraphKind::kAnticausal, GraphSizes{}, s);
  const JointTable& obs = m.observable();
  // X1 is independent of X2 given Y only through Q; check X1 _|_ (X2) | Y holds.
  const std::size_t x1[] = {0}, x2[] = {1}, y[] = {2};
  CHECK(mutual_information(obs, x1, x2, y) == doctest::Approx(0.0).epsilon(1e-12));
  const GraphModel c = random_graph_model(GraphKind::kCausal, GraphSizes{}, s);
  // Y depends on X2 only through X1.
  const std::size_t x1c[] = {0}, x2c[] = {1}, yc[] = {2};
  CHECK(std::abs(mutual_information(c.observable(), yc, x2c, x1c)) < 1e-12);
  CHECK(parse_graph_kind(to_string(GraphKind::kThreeFeature)) == GraphKind::kThreeFeature);
  CHECK_THROWS(parse_graph_kind("cyclic"));
}

TEST_CASE("anticausal posterior recovery inverts the mixing") {
  Stream s(8);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t nx = 3, ny = 2;
    Matrix m{nx, ny, std::vector<double>(nx * ny)};
    for (std::size_t y = 0; y < ny; ++y) {
      const auto col = s.dirichlet(nx, 1.0);
      for (std::size_t x = 0; x < nx; ++x) m.data[x * ny + y] = col[x];
    }
    const auto q = s.dirichlet(ny, 1.0);
    std::vector<double> pi(nx, 0.0);
    for (std::size_t x = 0; x < nx; ++x)
      for (std::size_t y = 0; y < ny; ++y) pi[x] += m(x, y) * q[y];
    try {
      const auto r = recover_posterior_anticausal(m, pi);
      for (std::size_t y = 0; y < ny; ++y) CHECK(r[y] == doctest::Approx(q[y]).epsilon(1e-8));
    } catch (const SingularRecovery&) {
    }
  }
  const Matrix singular{2, 2, {0.5, 0.5, 0.5, 0.5}};
  const double pi[] = {0.5, 0.5};
  CHECK_THROWS_AS(recover_posterior_anticausal(singular, pi), SingularRecovery);
  const Matrix wide{1, 2, {1.0, 1.0}};
  const double one[] = {1.0};
  CHECK_THROWS_AS(recover_posterior_anticausal(wide, one), SingularRecovery);
}

TEST_CASE("anticausal check on well-conditioned models") {
  Stream s(12);
  std::size_t redraws = 0;
  for (int i = 0; i < 50; ++i) {
    const CheckReport r = check_anticausal_pi_matches_x2(random_well_conditioned_anticausal(s, 1.0, &redraws));
    CHECK(r.max_violation <= 1e-9);
    CHECK(r.extra.at("recovery_error") <= 1e-6);
  }
}

TEST_CASE("per-feature pi on a label-last table") {
  Stream s(2);
  const GraphModel m = random_graph_model(GraphKind::kThreeFeature, GraphSizes{}, s);
  const PiFeature f1 = pi_per_feature(m.observable(), 0);
  const PiVariable v = induce_pi(m.observable(), 0, std::vector<std::size_t>{1, 2}, std::vector<std::size_t>{3});
  CHECK(f1.mi_with_label == doctest::Approx(oracle::mi(v.joint, {0}, {1})).epsilon(1e-12));
  CHECK(f1.num_states == v.states.size());
  CHECK_THROWS_AS(pi_per_feature(m.observable(), 3), InvalidArgument);
}

TEST_CASE("sweeps are deterministic in the master seed") {
  SweepOptions o{50, 123, 1.0};
  CHECK(sweep_pi_keeps_x1_information(o).to_json() == sweep_pi_keeps_x1_information(o).to_json());
  CHECK(sweep_anticausal_pi_matches_x2(o).to_json() == sweep_anticausal_pi_matches_x2(o).to_json());
  const auto a = find_pi_ordering_counterexample(200, 5);
  const auto b = find_pi_ordering_counterexample(200, 5);
  CHECK(a.found == b.found);
  CHECK(a.draws == b.draws);
}
