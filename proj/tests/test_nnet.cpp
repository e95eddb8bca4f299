#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "spur/errors.hpp"
#include "spur/kernels.hpp"
#include "spur/nnet.hpp"

using namespace spur;

namespace {

SparseBatch random_batch(Stream& s, std::size_t width, std::size_t n, std::size_t classes) {
  SparseBatch b;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::uint32_t> active;
    for (std::uint32_t j = 0; j < width; ++j)
      if (s.uniform() < 0.3) active.push_back(j);
    b.add(active, s.index(classes));
  }
  return b;
}

}  // namespace

TEST_CASE("network shapes and validation") {
  CHECK_THROWS_AS(Network({5}), InvalidArgument);
  CHECK_THROWS_AS(Network({5, 0, 2}), InvalidArgument);
  const Network n({6, 4, 2});
  CHECK(n.depth() == 2);
  CHECK(n.layer(0).rows == 4);
  CHECK(n.layer(0).cols == 6);
  CHECK(toy_widths(102, 1) == std::vector<std::size_t>{102, 2});
  CHECK(toy_widths(102, 2) == std::vector<std::size_t>{102, 10, 2});
  CHECK(toy_widths(102, 3) == std::vector<std::size_t>{102, 10, 32, 2});
  CHECK_THROWS_AS(toy_widths(102, 4), InvalidArgument);
}

TEST_CASE("initialization stays inside the fan-in bound") {
  Stream s(4);
  const Network n = init_network({50, 10, 2}, s);
  for (double w : n.layer(0).data) CHECK(std::abs(w) <= 1.0 / std::sqrt(50.0));
  for (double w : n.layer(1).data) CHECK(std::abs(w) <= 1.0 / std::sqrt(10.0));
}

TEST_CASE("sparse forward equals dense forward and the effective map") {
  Stream s(5);
  const Network n = init_network({12, 7, 5, 3}, s);
  const std::uint32_t active[] = {1, 4, 11};
  std::vector<double> x(12, 0.0);
  for (auto j : active) x[j] = 1.0;
  const auto a = n.forward_sparse(active);
  const auto b = n.forward(x);
  const DenseMatrix e = effective_weights(n);
  for (std::size_t r = 0; r < 3; ++r) {
    CHECK(a[r] == doctest::Approx(b[r]).epsilon(1e-13));
    double ex = 0.0;
    for (auto j : active) ex += e(r, j);
    CHECK(ex == doctest::Approx(b[r]).epsilon(1e-12));
  }
}

TEST_CASE("analytic gradients match central differences") {
  Stream s(6);
  for (std::size_t depth = 1; depth <= 3; ++depth) {
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<std::size_t> widths{9};
      for (std::size_t l = 1; l < depth; ++l) widths.push_back(3 + s.index(4));
      widths.push_back(2 + s.index(2));
      const Network net = init_network(widths, s);
      const SparseBatch batch = random_batch(s, 9, 6, widths.back());
      CHECK(oracle::gradient_error(net, batch) <= 1e-5);
      std::vector<DenseMatrix> g;
      CHECK(loss_and_grads(net, batch, g) == doctest::Approx(oracle::batch_loss(net, batch)).epsilon(1e-12));
    }
  }
}

TEST_CASE("adam update matches the hand-computed first steps") {
  Network net({2, 1});
  net.layer(0).data = {1.0, -1.0};
  Adam adam(net, {0.1, 0.9, 0.999, 1e-8});
  std::vector<DenseMatrix> g{DenseMatrix(1, 2)};
  g[0].data = {0.5, -2.0};
  adam.step(net, g);
  // First step moves every coordinate by lr * sign(g) (up to eps).
  CHECK(net.layer(0).data[0] == doctest::Approx(0.9).epsilon(1e-7));
  CHECK(net.layer(0).data[1] == doctest::Approx(-0.9).epsilon(1e-7));
  const double after_first = net.layer(0).data[0];
  g[0].data = {0.5, 0.0};
  adam.step(net, g);
  const double m = 0.9 * 0.05 + 0.1 * 0.5, v = 0.999 * 0.00025 + 0.001 * 0.25;
  const double mhat = m / (1 - 0.81), vhat = v / (1 - 0.999 * 0.999);
  CHECK(net.layer(0).data[0] == doctest::Approx(after_first - 0.1 * mhat / (std::sqrt(vhat) + 1e-8)).epsilon(1e-12));
  CHECK(adam.steps() == 2);
}

TEST_CASE("training configuration validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.max_iterations = 25;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = TrainConfig{};
  c.learning_rate = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = TrainConfig{};
  c.beta2 = 1.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("trajectory metrics and support classification") {
  const ToyConfig toy(20, 0.25);
  DenseMatrix e(2, toy.input_width());
  // A perfect rule on X2 parity only.
  for (std::size_t x2 = 0; x2 < 20; ++x2) e(ToyConfig::label(x2), 2 + x2) = 1.0;
  e(0, 0) = 0.25;
  e(1, 0) = -0.25;
  const auto support = enumerate_support(toy);
  CHECK(classifies_support(e, support));
  const TrajectoryPoint p = trajectory_metrics(e, toy);
  CHECK(p.accuracy == doctest::Approx(1.0));
  CHECK(p.avg_w_x1 == doctest::Approx(0.5 / 4.0));
  CHECK(p.avg_w_x2 == doctest::Approx(20.0 / 40.0));
  CHECK(p.avg_w_zone == doctest::Approx(10.0 / 20.0));
  // X1-only rule: right outside the zone, half wrong inside.
  DenseMatrix f(2, toy.input_width());
  f(0, 0) = 1.0;
  f(1, 1) = 1.0;
  CHECK_FALSE(classifies_support(f, support));
  CHECK(trajectory_metrics(f, toy).accuracy == doctest::Approx(toy.x1_only_accuracy()));
}

TEST_CASE("training converges, is deterministic and stops at the cap") {
  const ToyConfig toy(20, 0.1);
  Stream s(7);
  const Network net = init_network(toy_widths(toy.input_width(), 2), s);
  TrainConfig c;
  c.seed = 3;
  const TrainReport a = train_until_converged(toy, net, c);
  const TrainReport b = train_until_converged(toy, net, c);
  REQUIRE(a.converged);
  CHECK(a.iterations_to_converge == b.iterations_to_converge);
  CHECK(a.network.layer(0).data == b.network.layer(0).data);
  CHECK(a.trajectory.front().iteration == 0);
  CHECK(a.iterations_run == a.iterations_to_converge + 4 * c.check_interval);
  CHECK(trajectory_metrics(effective_weights(a.network), toy).accuracy == doctest::Approx(1.0));
  CHECK(classifies_support(effective_weights(a.network), enumerate_support(toy)));

  c.check_interval = 5;
  c.max_iterations = 25;
  const TrainReport capped = train_until_converged(ToyConfig(500, 0.04), init_network({502, 10, 2}, s), c);
  CHECK_FALSE(capped.converged);
  CHECK(capped.iterations_run == 25);
}

TEST_CASE("without a zone training converges faster than with one") {
  double zero = 0.0, some = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Stream s(seed);
    const Network net = init_network({102, 2}, s);
    TrainConfig c;
    c.seed = seed;
    zero += static_cast<double>(train_until_converged(ToyConfig(100, 0.0), net, c).iterations_to_converge);
    some += static_cast<double>(train_until_converged(ToyConfig(100, 0.04), net, c).iterations_to_converge);
  }
  CHECK(zero < some);
}

TEST_CASE("scalar and avx2 kernels train to the same network") {
  if (kernels::avx2::table() == nullptr) return;
  const ToyConfig toy(50, 0.25);
  Stream s(8);
  const Network net = init_network(toy_widths(toy.input_width(), 2), s);
  TrainConfig c;
  c.seed = 1;
  c.max_iterations = 300;
  kernels::select(kernels::Isa::kScalar);
  const TrainReport a = train_until_converged(toy, net, c);
  kernels::select(kernels::Isa::kAvx2);
  const TrainReport b = train_until_converged(toy, net, c);
  for (std::size_t l = 0; l < net.depth(); ++l)
    for (std::size_t i = 0; i < net.layer(l).data.size(); ++i)
      CHECK(a.network.layer(l).data[i] == doctest::Approx(b.network.layer(l).data[i]).epsilon(1e-9));
}

TEST_CASE("trajectory csv format") {
  const TrajectoryPoint p{25, 0.96, 0.1, 0.2, 0.3};
  const std::string csv = trajectory_csv(std::span(&p, 1));
  CHECK(csv.rfind("iter,acc,avg_w_x1,avg_w_x2,avg_w_zone\n25,", 0) == 0);
}
