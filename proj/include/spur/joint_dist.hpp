#pragma once

// Exact finite joint distributions and the toy spurious-feature process.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "spur/rng.hpp"

namespace spur {

// Dense joint probability table, row-major over the axes (last axis fastest).
class JointTable {
 public:
  static constexpr double kTolerance = 1e-12;

  JointTable() = default;
  // Throws InvalidArgument unless probs is a valid distribution of the
  // given shape (cells >= 0, total within kTolerance of 1).
  JointTable(std::vector<std::string> names, std::vector<std::size_t> sizes,
             std::vector<double> probs);
  // Normalizes nonnegative weights first.
  static JointTable from_weights(std::vector<std::string> names,
                                 std::vector<std::size_t> sizes,
                                 std::vector<double> weights);

  std::size_t rank() const { return sizes_.size(); }
  std::size_t size(std::size_t axis) const { return sizes_.at(axis); }
  const std::vector<std::size_t>& sizes() const { return sizes_; }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t axis) const { return names_.at(axis); }
  // Throws InvalidArgument for unknown names.
  std::size_t axis(const std::string& name) const;

  std::size_t num_cells() const { return probs_.size(); }
  std::span<const double> probs() const { return probs_; }
  double prob(std::span<const std::size_t> outcome) const { return probs_[flat_index(outcome)]; }

  std::size_t flat_index(std::span<const std::size_t> outcome) const;
  std::vector<std::size_t> outcome(std::size_t flat) const;
  std::size_t stride(std::size_t axis) const { return strides_.at(axis); }

  nlohmann::json to_json() const;
  static JointTable from_json(const nlohmann::json& doc);

 private:
  std::vector<std::string> names_;
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> strides_;
  std::vector<double> probs_;
};

struct Condition {
  std::size_t axis;
  std::size_t value;
};

// Exact marginal over keep_axes (in the given order), optionally conditioned
// on a single axis value. Throws InvalidArgument on a zero-probability event.
JointTable project(const JointTable& table, std::span<const std::size_t> keep_axes,
                   std::optional<Condition> condition = std::nullopt);
// Axis lookup by name.
JointTable project(const JointTable& table, const std::vector<std::string>& keep_axes,
                   std::optional<std::pair<std::string, std::size_t>> condition = std::nullopt);

// Marginal probability vector of one axis.
std::vector<double> marginal(const JointTable& table, std::size_t axis);

// Inverse-CDF sampler over the flattened table.
class Sampler {
 public:
  explicit Sampler(const JointTable& table);
  std::size_t draw_cell(Stream& stream) const;
  const JointTable& table() const { return table_; }

 private:
  JointTable table_;
  std::vector<double> cdf_;
};

std::vector<std::vector<std::size_t>> sample(const JointTable& table, Stream& stream,
                                             std::size_t n);

// --- toy process ------------------------------------------------------------

// X2 uniform on d2 one-hot values; Y is the index parity (even index -> class
// 0, 1-based); X1 copies the label outside a central zone of m = round(2 nu d2)
// indices and is a fair coin inside it.
class ToyConfig {
 public:
  // Throws InvalidArgument on d2 < 4, nu outside [0, 0.5], or a zone whose
  // integer extent does not contain exactly m indices.
  ToyConfig(std::size_t d2, double nu);

  std::size_t d2() const { return d2_; }
  double nu() const { return nu_; }
  std::size_t zone_size() const { return zone_.size(); }
  // 1-based indices, ascending.
  const std::vector<std::size_t>& zone() const { return zone_; }
  // 0-based X2 index.
  bool in_zone(std::size_t x2) const { return in_zone_[x2]; }
  // Label of 0-based X2 index.
  static std::size_t label(std::size_t x2) { return (x2 + 1) % 2 == 0 ? 0 : 1; }
  // Exact accuracy of the best X1-only classifier.
  double x1_only_accuracy() const;
  std::size_t input_width() const { return 2 + d2_; }

 private:
  std::size_t d2_;
  double nu_;
  std::vector<std::size_t> zone_;
  std::vector<bool> in_zone_;
};

struct SupportPoint {
  std::size_t x1;
  std::size_t x2;  // 0-based
  std::size_t y;
  double prob;
};

// Axes (X1: 2, X2: d2, Y: 2).
JointTable build_toy(const ToyConfig& config);
// Positive-probability points ordered by x2 then x1.
std::vector<SupportPoint> enumerate_support(const ToyConfig& config);

}  // namespace spur
