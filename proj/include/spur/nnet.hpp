#pragma once

// Bias-free linear multi-layer networks trained with softmax cross-entropy
// and Adam, plus the exact-support convergence loop for the toy process.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spur/joint_dist.hpp"
#include "spur/rng.hpp"

namespace spur {

// Row-major rows x cols.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

// Binary inputs stored as the list of active coordinates per example.
class SparseBatch {
 public:
  void clear();
  void add(std::span<const std::uint32_t> active, std::size_t label);
  std::size_t size() const { return labels_.size(); }
  std::span<const std::uint32_t> active(std::size_t i) const {
    return {indices_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }
  std::size_t label(std::size_t i) const { return labels_[i]; }

 private:
  std::vector<std::uint32_t> indices_;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::size_t> labels_;
};

class Network {
 public:
  Network() = default;
  // widths = [in, hidden..., out]; throws InvalidArgument on fewer than two
  // entries or a zero width.
  explicit Network(std::vector<std::size_t> widths);

  const std::vector<std::size_t>& widths() const { return widths_; }
  std::size_t depth() const { return layers_.size(); }
  std::size_t input_width() const { return widths_.front(); }
  std::size_t output_width() const { return widths_.back(); }
  DenseMatrix& layer(std::size_t i) { return layers_.at(i); }
  const DenseMatrix& layer(std::size_t i) const { return layers_.at(i); }
  std::vector<DenseMatrix>& layers() { return layers_; }
  const std::vector<DenseMatrix>& layers() const { return layers_; }

  std::vector<double> forward(std::span<const double> x) const;
  std::vector<double> forward_sparse(std::span<const std::uint32_t> active) const;

 private:
  std::vector<std::size_t> widths_;
  std::vector<DenseMatrix> layers_;
};

// Layer widths for the toy experiments: depth 1 -> [in, 2], depth 2 ->
// [in, 10, 2], depth 3 -> [in, 10, 32, 2].
std::vector<std::size_t> toy_widths(std::size_t input_width, std::size_t depth);

// Each weight ~ Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Network init_network(std::vector<std::size_t> widths, Stream& stream);

// Mean softmax cross-entropy (nats) and its gradient for every layer.
double loss_and_grads(const Network& net, const SparseBatch& batch, std::vector<DenseMatrix>& grads);

// E = W_L ... W_1 (out x in).
DenseMatrix effective_weights(const Network& net);

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam(const Network& net, AdamConfig config);
  // Updates every parameter of every layer.
  void step(Network& net, const std::vector<DenseMatrix>& grads);
  // Updates only the listed (layer, flat index range) blocks.
  void step_block(DenseMatrix& weights, const DenseMatrix& grad, std::size_t layer, std::size_t begin,
                  std::size_t end);
  void advance() { ++t_; }
  std::size_t steps() const { return t_; }

 private:
  AdamConfig cfg_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 32;
  std::size_t check_interval = 25;
  std::size_t consecutive_checks = 5;
  std::size_t max_iterations = 200000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;

  // Throws InvalidArgument on non-positive values or
  // check_interval * consecutive_checks > max_iterations.
  void validate() const;
};

struct TrajectoryPoint {
  std::size_t iteration = 0;
  double accuracy = 0.0;
  double avg_w_x1 = 0.0;
  double avg_w_x2 = 0.0;
  double avg_w_zone = 0.0;
};

struct TrainReport {
  bool converged = false;
  // Iteration of the first check in the winning streak; 0 if not converged.
  std::size_t iterations_to_converge = 0;
  std::size_t iterations_run = 0;
  std::vector<TrajectoryPoint> trajectory;
  Network network;
};

// Mean |E| over the X1 block, the X2 block and the zone columns, plus the
// exact distribution accuracy (argmax, ties to class 0).
TrajectoryPoint trajectory_metrics(const DenseMatrix& e, const ToyConfig& config);

// True when every support point is classified correctly.
bool classifies_support(const DenseMatrix& e, std::span<const SupportPoint> support);

// Samples batches from the toy process with the stream derived from
// config.seed and trains until the exact-support check passes
// consecutive_checks times in a row.
TrainReport train_until_converged(const ToyConfig& toy, Network network, const TrainConfig& config);

std::string trajectory_csv(std::span<const TrajectoryPoint> rows);

}  // namespace spur
