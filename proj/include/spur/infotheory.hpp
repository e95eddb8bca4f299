#pragma once

// Exact information quantities on finite tables, and the P(target | context)
// feature ("Pi") built from them. All entropies are in bits.

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "spur/graph_model.hpp"
#include "spur/joint_dist.hpp"

namespace spur {

double entropy(std::span<const double> dist);
// Joint entropy of a subset of axes.
double entropy(const JointTable& table, std::span<const std::size_t> axes);
double conditional_entropy(const JointTable& table, std::span<const std::size_t> target,
                           std::span<const std::size_t> given);

// I(A; B | C); axis sets must be disjoint. Clamped below at 0 when the
// rounding residue is under 1e-12.
double mutual_information(const JointTable& table, std::span<const std::size_t> a,
                          std::span<const std::size_t> b, std::span<const std::size_t> given = {});
double mutual_information(const JointTable& table, const std::vector<std::string>& a,
                          const std::vector<std::string>& b, const std::vector<std::string>& given = {});

// Rows of P(target | context), one per flattened context configuration.
struct PiTable {
  std::string target;
  std::vector<std::string> context;
  std::vector<std::vector<double>> rows;
  std::vector<bool> defined;  // false where the context has zero probability

  std::size_t num_rows() const { return rows.size(); }
};

PiTable compute_pi(const JointTable& table, std::size_t target, std::span<const std::size_t> context);
// P(X1 | X2) on a table with axes named X1 and X2.
PiTable compute_pi(const JointTable& table);

// Pi viewed as a discrete random variable: context values with equal rows
// (after rounding to 12 decimals) share a state.
struct PiVariable {
  // Axes ("Pi", keep...).
  JointTable joint;
  // Row of each state, in order of first appearance.
  std::vector<std::vector<double>> states;
  // State of each context configuration; SIZE_MAX where undefined.
  std::vector<std::size_t> state_of;
};

PiVariable induce_pi(const JointTable& table, std::size_t target, std::span<const std::size_t> context,
                     std::span<const std::size_t> keep);
// Joint over (Pi, X1, Y) for a table with axes X1, X2, Y.
PiVariable pi_as_variable(const JointTable& table);

struct CheckReport {
  std::string check;
  std::size_t trials = 0;
  double max_violation = 0.0;
  std::vector<std::uint64_t> failing_seeds;
  // Further named maxima (e.g. recovery error) and observed values.
  std::map<std::string, double> extra;

  void record(double violation, std::uint64_t seed, double tolerance);
  void merge(const CheckReport& other, double tolerance);
  nlohmann::json to_json() const;
};

// |I(X1; Pi) - I(X1; X2)|.
CheckReport check_pi_keeps_x1_information(const JointTable& table);
// max(0, I(X1; Y) - I(Pi; Y)); requires H(Y | X2) < 1e-9, else InvalidArgument.
CheckReport check_pi_beats_x1(const JointTable& table);
// Same quantity on the observable joint of a causal model.
CheckReport check_causal_pi_beats_x1(const GraphModel& model);

// Dense row-major matrix: rows index X1 values, columns index Y values.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

inline constexpr double kRecoveryConditionThreshold = 1e-8;

// Solves M q = pi_row in the least-squares sense, clamps to [0, 1] and
// renormalizes. Throws SingularRecovery when sigma_min / sigma_max of M is at
// or below kRecoveryConditionThreshold or M has more columns than rows.
std::vector<double> recover_posterior_anticausal(const Matrix& m, std::span<const double> pi_row);

// max_violation = |I(Pi; Y) - I(X2; Y)|; extra["recovery_error"] = max over
// x2 of the inf-norm error of the recovered P(Y | x2).
CheckReport check_anticausal_pi_matches_x2(const GraphModel& model);

struct PiFeature {
  PiTable pi;
  std::size_t num_states = 0;
  double mi_with_label = 0.0;  // I(Pi_i; Y), bits
};

// table axes are (X1..XL, Y) with the label last; feature is 0-based.
PiFeature pi_per_feature(const JointTable& table, std::size_t feature);

// --- randomized property sweeps ----------------------------------------------

struct SweepOptions {
  std::size_t trials = 1000;
  std::uint64_t master_seed = 0;
  double concentration = 1.0;
};

// Random Dirichlet joint over (X1, X2, Y) with sizes drawn from the stream
// (|X1| in 2..4, |X2| in 2..8, |Y| in 2..3).
JointTable random_joint_table(Stream& stream, double concentration = 1.0);
// Random P(X1, X2) with Y := f(X2) for a random map f.
JointTable random_deterministic_label_table(Stream& stream, double concentration = 1.0);
// Random anticausal model whose P(X1 | Y) passes the conditioning threshold
// (|X1| >= |Y|). Redraws are counted in *redraws.
GraphModel random_well_conditioned_anticausal(Stream& stream, double concentration, std::size_t* redraws);

CheckReport sweep_pi_keeps_x1_information(const SweepOptions& opts);
CheckReport sweep_pi_beats_x1(const SweepOptions& opts);
CheckReport sweep_causal_pi_beats_x1(const SweepOptions& opts);
CheckReport sweep_anticausal_pi_matches_x2(const SweepOptions& opts);

// Searches three-feature models for I(Pi_3; Y) > I(Pi_1; Y).
struct CounterexampleResult {
  bool found = false;
  std::uint64_t seed = 0;
  std::size_t draws = 0;
  double mi_pi1 = 0.0;
  double mi_pi3 = 0.0;
};
CounterexampleResult find_pi_ordering_counterexample(std::size_t max_draws, std::uint64_t master_seed,
                                                     double concentration = 1.0);

}  // namespace spur
