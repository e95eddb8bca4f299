#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "spur/errors.hpp"
#include "spur/joint_dist.hpp"

using namespace spur;

TEST_CASE("joint table rejects invalid distributions") {
  CHECK_THROWS_AS(JointTable({"A"}, {2}, {0.5, 0.6}), InvalidArgument);
  CHECK_THROWS_AS(JointTable({"A"}, {2}, {1.2, -0.2}), InvalidArgument);
  CHECK_THROWS_AS(JointTable({"A"}, {3}, {0.5, 0.5}), InvalidArgument);
  CHECK_THROWS_AS(JointTable({"A", "A"}, {1, 2}, {0.5, 0.5}), InvalidArgument);
  CHECK_THROWS_AS(JointTable::from_weights({"A"}, {2}, {0.0, 0.0}), InvalidArgument);
  CHECK_NOTHROW(JointTable({"A"}, {2}, {0.5, 0.5 + 1e-13}));
}

TEST_CASE("from_weights normalizes and indexes row-major") {
  const JointTable t = JointTable::from_weights({"A", "B"}, {2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.prob(std::vector<std::size_t>{1, 2}) == doctest::Approx(6.0 / 21.0));
  CHECK(t.stride(0) == 3);
  CHECK(t.axis("B") == 1);
  CHECK_THROWS_AS(t.axis("C"), InvalidArgument);
  for (std::size_t f = 0; f < t.num_cells(); ++f) CHECK(t.flat_index(t.outcome(f)) == f);
}

TEST_CASE("projection and conditioning match direct sums") {
  Stream s(7);
  std::vector<double> w(2 * 3 * 4);
  for (double& x : w) x = s.uniform();
  const JointTable t = JointTable::from_weights({"A", "B", "C"}, {2, 3, 4}, w);

  const std::size_t keep[] = {2, 0};
  const JointTable p = project(t, keep);
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t a = 0; a < 2; ++a) {
      double sum = 0.0;
      for (std::size_t b = 0; b < 3; ++b) sum += t.prob(std::vector<std::size_t>{a, b, c});
      CHECK(p.prob(std::vector<std::size_t>{c, a}) == doctest::Approx(sum).epsilon(1e-12));
    }

  const JointTable cond = project(t, std::vector<std::string>{"A"}, std::make_pair(std::string("B"), std::size_t{1}));
  double pb = 0.0;
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t c = 0; c < 4; ++c) pb += t.prob(std::vector<std::size_t>{a, 1, c});
  double pa0 = 0.0;
  for (std::size_t c = 0; c < 4; ++c) pa0 += t.prob(std::vector<std::size_t>{0, 1, c});
  CHECK(cond.probs()[0] == doctest::Approx(pa0 / pb).epsilon(1e-12));

  const JointTable zero({"A", "B"}, {2, 2}, {0.5, 0.0, 0.5, 0.0});
  const std::size_t a_only[] = {0};
  CHECK_THROWS_AS(project(zero, a_only, Condition{1, 1}), InvalidArgument);
}

TEST_CASE("json round trip") {
  const JointTable t = JointTable::from_weights({"X", "Y"}, {2, 2}, {1, 2, 3, 4});
  const JointTable u = JointTable::from_json(t.to_json());
  CHECK(u.names() == t.names());
  CHECK(u.sizes() == t.sizes());
  for (std::size_t f = 0; f < t.num_cells(); ++f) CHECK(u.probs()[f] == t.probs()[f]);
}

TEST_CASE("sampler frequencies and determinism") {
  const JointTable t = JointTable::from_weights({"A"}, {4}, {1, 2, 3, 4});
  Stream s1(11), s2(11);
  const auto a = sample(t, s1, 100000);
  const auto b = sample(t, s2, 100000);
  CHECK(a == b);
  std::vector<double> freq(4, 0.0);
  for (const auto& o : a) freq[o[0]] += 1.0 / 100000.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double p = (i + 1) / 10.0;
    CHECK(std::abs(freq[i] - p) < 5.0 * std::sqrt(p * (1 - p) / 100000.0));
  }
}

TEST_CASE("toy zone geometry") {
  const ToyConfig c(100, 0.25);
  REQUIRE(c.zone_size() == 50);
  CHECK(c.zone().front() == 26);
  CHECK(c.zone().back() == 75);
  CHECK(c.in_zone(25));
  CHECK_FALSE(c.in_zone(24));
  CHECK(ToyConfig(50, 0.0).zone_size() == 0);
  CHECK(ToyConfig(500, 0.5).zone_size() == 500);
  for (std::size_t d2 : {10, 50, 100, 500})
    for (double nu : {0.04, 0.1, 0.25, 0.5})
      CHECK(ToyConfig(d2, nu).zone_size() == static_cast<std::size_t>(std::llround(2 * nu * d2)));
  CHECK_THROWS_AS(ToyConfig(2, 0.1), InvalidArgument);
  CHECK_THROWS_AS(ToyConfig(100, 0.6), InvalidArgument);
  CHECK_THROWS_AS(ToyConfig(100, -0.1), InvalidArgument);
}

TEST_CASE("toy label is index parity") {
  CHECK(ToyConfig::label(0) == 1);
  CHECK(ToyConfig::label(1) == 0);
  CHECK(ToyConfig::label(98) == 1);
  CHECK(ToyConfig::label(99) == 0);
}

TEST_CASE("toy table matches the generative description") {
  for (auto [d2, nu] : {std::pair{100ul, 0.25}, std::pair{50ul, 0.04}, std::pair{20ul, 0.5}}) {
    const ToyConfig c(d2, nu);
    const JointTable t = build_toy(c);
    const auto want = oracle::toy_probs(d2, nu);
    REQUIRE(t.num_cells() == want.size());
    for (std::size_t f = 0; f < want.size(); ++f) CHECK(t.probs()[f] == doctest::Approx(want[f]).epsilon(1e-15));
    CHECK(c.x1_only_accuracy() == doctest::Approx(1.0 - nu));
    const auto support = enumerate_support(c);
    CHECK(support.size() == d2 + c.zone_size());
    double mass = 0.0;
    for (const auto& p : support) mass += p.prob;
    CHECK(mass == doctest::Approx(1.0));
  }
}
