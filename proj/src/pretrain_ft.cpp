#include "spur/pretrain_ft.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "spur/errors.hpp"
#include "spur/kernels.hpp"

namespace spur {

namespace {

void require_pretrainable(const Network& net, const ToyConfig& toy) {
  if (net.depth() < 2) throw InvalidArgument("pretraining needs a network with at least two layers");
  if (net.widths()[1] < 4) throw InvalidArgument("first hidden width must be at least 4");
  if (net.input_width() != toy.input_width()) throw InvalidArgument("network input width must be 2 + d2");
}

// -log softmax(a, b)[target]
double two_way_nll(double a, double b, std::size_t target) {
  const double mx = std::max(a, b);
  const double lse = mx + std::log(std::exp(a - mx) + std::exp(b - mx));
  return lse - (target == 0 ? a : b);
}

}  // namespace

double masked_cross_entropy(const Network& net, const ToyConfig& toy) {
  const DenseMatrix& w = net.layer(0);
  double ce = 0.0;
  for (const SupportPoint& pt : enumerate_support(toy))
    ce += pt.prob * two_way_nll(w(0, 2 + pt.x2), w(1, 2 + pt.x2), pt.x1);
  return ce;
}

PretrainResult pretrain_first_layer(Network network, const ToyConfig& toy, const PretrainConfig& config) {
  require_pretrainable(network, toy);
  if (!(config.tolerance_nats > 0.0)) throw InvalidArgument("pretraining tolerance must be positive");
  if (config.batch_size == 0 || config.check_interval == 0 || !(config.learning_rate > 0.0))
    throw InvalidArgument("pretraining parameters must be positive");

  PretrainResult res;
  res.floor = static_cast<double>(toy.zone_size()) / static_cast<double>(toy.d2()) * std::log(2.0);

  const auto support = enumerate_support(toy);
  std::vector<double> cdf(support.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) cdf[i] = (acc += support[i].prob);

  Stream stream = Stream::derive(config.seed, 0x9e7a, 0);
  Adam adam(network, {config.learning_rate, 0.9, 0.999, 1e-8});
  DenseMatrix& w = network.layer(0);
  DenseMatrix grad(w.rows, w.cols);
  const std::size_t block_end = 2 * w.cols;  // rows 1-2
  const double inv_n = 1.0 / static_cast<double>(config.batch_size);

  auto check = [&](std::size_t iter) {
    res.cross_entropy = masked_cross_entropy(network, toy);
    res.log.push_back({iter, res.cross_entropy, res.floor});
    return res.cross_entropy <= res.floor + config.tolerance_nats;
  };
  res.reached_floor = check(0);
  for (std::size_t iter = 1; iter <= config.max_iterations && !res.reached_floor; ++iter) {
    std::fill(grad.data.begin(), grad.data.begin() + static_cast<std::ptrdiff_t>(block_end), 0.0);
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const double u = stream.uniform() * cdf.back();
      std::size_t k = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
      const SupportPoint& pt = support[std::min(k, support.size() - 1)];
      const std::size_t col = 2 + pt.x2;
      const double a = w(0, col), c = w(1, col);
      const double mx = std::max(a, c);
      const double ea = std::exp(a - mx), ec = std::exp(c - mx);
      const double pa = ea / (ea + ec);
      grad(0, col) += (pa - (pt.x1 == 0 ? 1.0 : 0.0)) * inv_n;
      grad(1, col) += ((1.0 - pa) - (pt.x1 == 1 ? 1.0 : 0.0)) * inv_n;
    }
    adam.advance();
    adam.step_block(w, grad, 0, 0, block_end);
    res.iterations = iter;
    if (iter % config.check_interval == 0) res.reached_floor = check(iter);
  }

  double s = 0.0;
  for (std::size_t r = 0; r < 2; ++r) s += kernels::abs_sum(w.row(r).subspan(2));
  res.k = s / (2.0 * static_cast<double>(toy.d2()));
  res.network = std::move(network);
  return res;
}

void init_passthrough(Network& network, double k) {
  if (!(k > 0.0)) throw InvalidArgument("passthrough scale k must be positive");
  if (network.depth() < 2 || network.widths()[1] < 4) throw InvalidArgument("first hidden width must be at least 4");
  DenseMatrix& w = network.layer(0);
  std::fill(w.row(2).begin(), w.row(2).end(), 0.0);
  std::fill(w.row(3).begin(), w.row(3).end(), 0.0);
  w(2, 0) = k;
  w(2, 1) = -k;
  w(3, 0) = -k;
  w(3, 1) = k;
}

TrainReport finetune(const ToyConfig& toy, Network network, const TrainConfig& config) {
  return train_until_converged(toy, std::move(network), config);
}

std::string pretrain_log_csv(std::span<const PretrainLogRow> rows) {
  std::ostringstream out;
  out << "iter,ce_nats,floor_nats\n";
  char buf[96];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.10f,%.10f\n", r.iteration, r.ce_nats, r.floor_nats);
    out << buf;
  }
  return out.str();
}

}  // namespace spur
