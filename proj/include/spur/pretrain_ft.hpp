#pragma once

// Masked pretraining of the first layer (predict X1 from X2 with X1 zeroed),
// the +-k passthrough initialization, and label fine-tuning.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "spur/joint_dist.hpp"
#include "spur/nnet.hpp"

namespace spur {

struct PretrainConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 32;
  // Stop once the exact cross-entropy is within this many nats of H(X1|X2).
  double tolerance_nats = 0.01;
  std::size_t check_interval = 25;
  std::size_t max_iterations = 200000;
  std::uint64_t seed = 0;
};

struct PretrainLogRow {
  std::size_t iteration;
  double ce_nats;
  double floor_nats;
};

struct PretrainResult {
  Network network;
  double cross_entropy = 0.0;  // exact, nats
  double floor = 0.0;          // H(X1 | X2), nats
  double k = 0.0;
  bool reached_floor = false;
  std::size_t iterations = 0;
  std::vector<PretrainLogRow> log;
};

// Exact expected cross-entropy (nats) of first-layer outputs 1-2 on masked
// inputs [0, 0; x2] against X1.
double masked_cross_entropy(const Network& net, const ToyConfig& toy);

// Trains first-layer rows 1-2 only. Throws InvalidArgument when the network
// has depth < 2, the first hidden width is below 4, or the input width is not
// 2 + d2.
PretrainResult pretrain_first_layer(Network network, const ToyConfig& toy, const PretrainConfig& config);

// Rows 3 and 4 of the first layer become (+k, -k, 0, ...) and (-k, +k, 0, ...).
// Throws InvalidArgument for k <= 0 or a first hidden width below 4.
void init_passthrough(Network& network, double k);

// Full-network fine-tuning with the nnet convergence rule.
TrainReport finetune(const ToyConfig& toy, Network network, const TrainConfig& config);

std::string pretrain_log_csv(std::span<const PretrainLogRow> rows);

}  // namespace spur
