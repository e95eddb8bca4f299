#include "spur/nnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "spur/errors.hpp"
#include "spur/kernels.hpp"

namespace spur {

void SparseBatch::clear() {
  indices_.clear();
  offsets_.assign(1, 0);
  labels_.clear();
}

void SparseBatch::add(std::span<const std::uint32_t> active, std::size_t label) {
  indices_.insert(indices_.end(), active.begin(), active.end());
  offsets_.push_back(indices_.size());
  labels_.push_back(label);
}

Network::Network(std::vector<std::size_t> widths) : widths_(std::move(widths)) {
  if (widths_.size() < 2) throw InvalidArgument("a network needs at least an input and an output width");
  for (std::size_t w : widths_)
    if (w == 0) throw InvalidArgument("layer widths must be positive");
  for (std::size_t i = 0; i + 1 < widths_.size(); ++i) layers_.emplace_back(widths_[i + 1], widths_[i]);
}

std::vector<double> Network::forward(std::span<const double> x) const {
  if (x.size() != input_width()) throw InvalidArgument("input width mismatch");
  std::vector<double> a(x.begin(), x.end()), next;
  for (const DenseMatrix& w : layers_) {
    next.assign(w.rows, 0.0);
    for (std::size_t r = 0; r < w.rows; ++r) next[r] = kernels::dot(w.row(r), a);
    a.swap(next);
  }
  return a;
}

std::vector<double> Network::forward_sparse(std::span<const std::uint32_t> active) const {
  const DenseMatrix& w0 = layers_.front();
  std::vector<double> a(w0.rows, 0.0), next;
  for (std::size_t r = 0; r < w0.rows; ++r)
    for (std::uint32_t j : active) a[r] += w0(r, j);
  for (std::size_t l = 1; l < layers_.size(); ++l) {
    const DenseMatrix& w = layers_[l];
    next.assign(w.rows, 0.0);
    for (std::size_t r = 0; r < w.rows; ++r) next[r] = kernels::dot(w.row(r), a);
    a.swap(next);
  }
  return a;
}

std::vector<std::size_t> toy_widths(std::size_t input_width, std::size_t depth) {
  switch (depth) {
    case 1: return {input_width, 2};
    case 2: return {input_width, 10, 2};
    case 3: return {input_width, 10, 32, 2};
    default: throw InvalidArgument("toy networks have depth 1, 2 or 3");
  }
}

Network init_network(std::vector<std::size_t> widths, Stream& stream) {
  Network net(std::move(widths));
  for (DenseMatrix& w : net.layers()) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols));
    for (double& x : w.data) x = stream.uniform(-bound, bound);
  }
  return net;
}

double loss_and_grads(const Network& net, const SparseBatch& batch, std::vector<DenseMatrix>& grads) {
  if (batch.size() == 0) throw InvalidArgument("empty batch");
  const auto& layers = net.layers();
  const std::size_t depth = layers.size();
  grads.resize(depth);
  for (std::size_t l = 0; l < depth; ++l) {
    if (grads[l].rows != layers[l].rows || grads[l].cols != layers[l].cols)
      grads[l] = DenseMatrix(layers[l].rows, layers[l].cols);
    else
      std::fill(grads[l].data.begin(), grads[l].data.end(), 0.0);
  }

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  std::vector<std::vector<double>> acts(depth + 1);
  std::vector<double> delta, prev_delta;
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto active = batch.active(i);
    // acts[l] is the output of layer l-1; acts[0] (the sparse input) is unused.
    const DenseMatrix& w0 = layers[0];
    acts[1].assign(w0.rows, 0.0);
    for (std::size_t r = 0; r < w0.rows; ++r)
      for (std::uint32_t j : active) acts[1][r] += w0(r, j);
    for (std::size_t l = 1; l < depth; ++l) {
      acts[l + 1].assign(layers[l].rows, 0.0);
      for (std::size_t r = 0; r < layers[l].rows; ++r) acts[l + 1][r] = kernels::dot(layers[l].row(r), acts[l]);
    }

    const auto& logits = acts[depth];
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double v : logits) z += std::exp(v - mx);
    const double log_z = mx + std::log(z);
    const std::size_t y = batch.label(i);
    loss += log_z - logits[y];

    delta.resize(logits.size());
    for (std::size_t k = 0; k < logits.size(); ++k) delta[k] = std::exp(logits[k] - log_z) * inv_n;
    delta[y] -= inv_n;

    for (std::size_t l = depth; l-- > 1;) {
      const DenseMatrix& w = layers[l];
      prev_delta.assign(w.cols, 0.0);
      for (std::size_t r = 0; r < w.rows; ++r) {
        kernels::axpy(delta[r], acts[l], grads[l].row(r));
        kernels::axpy(delta[r], w.row(r), prev_delta);
      }
      delta.swap(prev_delta);
    }
    for (std::size_t r = 0; r < w0.rows; ++r)
      for (std::uint32_t j : active) grads[0](r, j) += delta[r];
  }
  return loss * inv_n;
}

DenseMatrix effective_weights(const Network& net) {
  DenseMatrix e = net.layer(0);
  for (std::size_t l = 1; l < net.depth(); ++l) {
    const DenseMatrix& w = net.layer(l);
    DenseMatrix next(w.rows, e.cols);
    kernels::matmul(w.data.data(), e.data.data(), next.data.data(), w.rows, w.cols, e.cols);
    e = std::move(next);
  }
  return e;
}

Adam::Adam(const Network& net, AdamConfig config) : cfg_(config) {
  for (const auto& w : net.layers()) {
    m_.emplace_back(w.data.size(), 0.0);
    v_.emplace_back(w.data.size(), 0.0);
  }
}

void Adam::step(Network& net, const std::vector<DenseMatrix>& grads) {
  ++t_;
  for (std::size_t l = 0; l < net.depth(); ++l) step_block(net.layer(l), grads[l], l, 0, grads[l].data.size());
}

void Adam::step_block(DenseMatrix& weights, const DenseMatrix& grad, std::size_t layer, std::size_t begin,
                      std::size_t end) {
  const double t = static_cast<double>(std::max<std::size_t>(t_, 1));
  const double step = cfg_.learning_rate / (1.0 - std::pow(cfg_.beta1, t));
  const double v_corr = 1.0 / (1.0 - std::pow(cfg_.beta2, t));
  kernels::active().adam(weights.data.data() + begin, grad.data.data() + begin, m_[layer].data() + begin,
                         v_[layer].data() + begin, end - begin, step, cfg_.beta1, cfg_.beta2, v_corr,
                         cfg_.epsilon);
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || batch_size == 0 || check_interval == 0 || consecutive_checks == 0 ||
      max_iterations == 0)
    throw InvalidArgument("training parameters must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0 && epsilon > 0.0))
    throw InvalidArgument("invalid Adam parameters");
  if (check_interval * consecutive_checks > max_iterations)
    throw InvalidArgument("max_iterations too small for the convergence rule");
}

TrajectoryPoint trajectory_metrics(const DenseMatrix& e, const ToyConfig& config) {
  if (e.cols != config.input_width()) throw InvalidArgument("effective weights have the wrong width");
  TrajectoryPoint p;
  double x1 = 0.0, x2 = 0.0, zone = 0.0;
  for (std::size_t r = 0; r < e.rows; ++r) {
    const auto row = e.row(r);
    x1 += kernels::abs_sum(row.subspan(0, 2));
    x2 += kernels::abs_sum(row.subspan(2));
    for (std::size_t i : config.zone()) zone += std::fabs(row[1 + i]);
  }
  const double rows = static_cast<double>(e.rows);
  p.avg_w_x1 = x1 / (rows * 2.0);
  p.avg_w_x2 = x2 / (rows * static_cast<double>(config.d2()));
  p.avg_w_zone = config.zone_size() > 0 ? zone / (rows * static_cast<double>(config.zone_size())) : 0.0;
  for (const SupportPoint& pt : enumerate_support(config)) {
    std::size_t best = 0;
    double best_v = e(0, pt.x1) + e(0, 2 + pt.x2);
    for (std::size_t r = 1; r < e.rows; ++r) {
      const double v = e(r, pt.x1) + e(r, 2 + pt.x2);
      if (v > best_v) {
        best_v = v;
        best = r;
      }
    }
    if (best == pt.y) p.accuracy += pt.prob;
  }
  return p;
}

bool classifies_support(const DenseMatrix& e, std::span<const SupportPoint> support) {
  for (const SupportPoint& pt : support) {
    const double target = e(pt.y, pt.x1) + e(pt.y, 2 + pt.x2);
    for (std::size_t r = 0; r < e.rows; ++r) {
      if (r == pt.y) continue;
      const double v = e(r, pt.x1) + e(r, 2 + pt.x2);
      // Ties go to the lower class index.
      if (v > target || (v == target && r < pt.y)) return false;
    }
  }
  return true;
}

TrainReport train_until_converged(const ToyConfig& toy, Network network, const TrainConfig& config) {
  config.validate();
  if (network.input_width() != toy.input_width()) throw InvalidArgument("network input width must be 2 + d2");
  if (network.output_width() != 2) throw InvalidArgument("toy networks have two outputs");

  const auto support = enumerate_support(toy);
  std::vector<double> cdf(support.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) cdf[i] = (acc += support[i].prob);

  Stream stream = Stream::derive(config.seed, 0x7a11, 0);
  Adam adam(network, {config.learning_rate, config.beta1, config.beta2, config.epsilon});
  std::vector<DenseMatrix> grads;
  SparseBatch batch;

  TrainReport report;
  auto record = [&](std::size_t iter) {
    const DenseMatrix e = effective_weights(network);
    TrajectoryPoint p = trajectory_metrics(e, toy);
    p.iteration = iter;
    report.trajectory.push_back(p);
    return classifies_support(e, support);
  };
  record(0);

  std::size_t streak = 0, streak_start = 0;
  for (std::size_t iter = 1; iter <= config.max_iterations; ++iter) {
    batch.clear();
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const double u = stream.uniform() * cdf.back();
      std::size_t k = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
      k = std::min(k, support.size() - 1);
      const SupportPoint& pt = support[k];
      const std::uint32_t active[] = {static_cast<std::uint32_t>(pt.x1), static_cast<std::uint32_t>(2 + pt.x2)};
      batch.add(active, pt.y);
    }
    loss_and_grads(network, batch, grads);
    adam.step(network, grads);
    report.iterations_run = iter;

    if (iter % config.check_interval != 0) continue;
    if (record(iter)) {
      if (streak++ == 0) streak_start = iter;
      if (streak == config.consecutive_checks) {
        report.converged = true;
        report.iterations_to_converge = streak_start;
        break;
      }
    } else {
      streak = 0;
    }
  }
  report.network = std::move(network);
  return report;
}

std::string trajectory_csv(std::span<const TrajectoryPoint> rows) {
  std::ostringstream out;
  out << "iter,acc,avg_w_x1,avg_w_x2,avg_w_zone\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.8f,%.8e,%.8e,%.8e\n", r.iteration, r.accuracy, r.avg_w_x1, r.avg_w_x2,
                  r.avg_w_zone);
    out << buf;
  }
  return out.str();
}

}  // namespace spur
