#pragma once

// The two learners compared by the convergence argument: a co-occurrence
// counting classifier on X1 and a linear plug-in classifier on Pi = P(X1 | X2).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "spur/joint_dist.hpp"

namespace spur {

struct LabeledIndex {
  std::size_t x1;
  std::size_t y;
};

struct LabeledPi {
  std::vector<double> pi;
  std::size_t y;
};

class CountClassifier {
 public:
  // h[x1][y]; rows of unseen x1 equal the label prior.
  std::vector<std::vector<double>> table;
  std::vector<double> prior;
  std::vector<bool> seen;

  const std::vector<double>& predict(std::size_t x1) const { return table.at(x1); }
};

class PiClassifier {
 public:
  // weights[y][x1]; each column (fixed x1) is a distribution over y.
  std::vector<std::vector<double>> weights;
  std::vector<double> prior;
  std::vector<std::vector<double>> x1_given_y;
  std::vector<bool> label_observed;
  bool known_prior = false;

  std::vector<double> predict(std::span<const double> pi) const;
};

// Throws InvalidArgument on an empty sample set or out-of-range values.
CountClassifier fit_count_classifier(std::span<const LabeledIndex> samples, std::size_t n_x1, std::size_t n_y);
PiClassifier fit_pi_classifier(std::span<const LabeledPi> samples, std::size_t n_y,
                               std::optional<std::vector<double>> known_prior = std::nullopt);

// n -> infinity limits, computed exactly from a table with axes X1, X2, Y.
CountClassifier limit_count_classifier(const JointTable& table);
PiClassifier limit_pi_classifier(const JointTable& table);

enum class InputKind { kX1, kPi };

// E over (x1, x2) of KL(P(Y | x1, x2) || h(. | input)), in nats. +inf when the
// classifier gives zero mass to a label of positive probability.
double expected_divergence(const JointTable& table, const CountClassifier& h);
double expected_divergence(const JointTable& table, const PiClassifier& h);

// Per-x2 convexity gap:
//   sum_x1 P(x1|x2) KL(P(Y|x2) || P(Y|x1)) - KL(P(Y|x2) || sum_x1 P(Y|x1) P(x1|x2))
// Entry is NaN for x2 of zero probability, +inf when the left side diverges.
std::vector<double> convexity_gaps(const JointTable& table);

enum class PriorMode { kEstimated, kKnown };

struct RateRow {
  std::size_t n;
  std::string learner;
  double mean_sq_error;
  double std_error;
  std::size_t seeds;
};

struct RateFit {
  std::string learner;
  double slope;
  double intercept;
  double r2;
};

struct RateReport {
  std::vector<RateRow> rows;  // grouped by n, count learner first
  std::vector<RateFit> fits;
  double divergence_count_limit = 0.0;
  double divergence_pi_limit = 0.0;
  // Per n: pi mean <= count mean + 2 standard errors.
  std::vector<bool> pi_not_worse;

  std::string to_csv() const;
  nlohmann::json summary() const;
};

struct RateOptions {
  std::vector<std::size_t> n_grid;
  std::size_t seeds_per_n = 50;
  PriorMode prior_mode = PriorMode::kEstimated;
  std::uint64_t master_seed = 0;
  std::size_t workers = 1;
};

// Throws InvalidArgument unless n_grid is strictly increasing, has at least 4
// points and spans at least two decades.
RateReport convergence_experiment(const JointTable& table, const RateOptions& opts);

// Least-squares line through (log10 x, log10 y).
RateFit fit_loglog(std::string learner, std::span<const double> x, std::span<const double> y);

}  // namespace spur
