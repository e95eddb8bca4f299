#pragma once

// Small discrete Bayesian networks: causal (Z -> X1, Z -> X2, X1 -> Y),
// anticausal (Z -> Y, Z -> Q, Y -> X1, Q -> X2) and the three-feature case
// (Z -> X1, Z -> X2, X2 -> Y, X3 -> Y).

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "spur/joint_dist.hpp"
#include "spur/rng.hpp"

namespace spur {

enum class GraphKind { kCausal, kAnticausal, kThreeFeature };

std::string_view to_string(GraphKind kind);
GraphKind parse_graph_kind(std::string_view name);

// P(child | parents) as a child_size x (product of parent sizes) matrix,
// row-major, each column a probability vector. Parent configurations are
// flattened with the last parent fastest.
struct Conditional {
  std::string child;
  std::vector<std::string> parents;
  std::size_t child_size = 0;
  std::size_t parent_configs = 1;
  std::vector<double> table;

  double at(std::size_t child_value, std::size_t parent_config) const {
    return table[child_value * parent_configs + parent_config];
  }
};

struct GraphSizes {
  std::size_t z = 2;
  std::size_t x1 = 2;
  std::size_t x2 = 2;
  std::size_t y = 2;
  std::size_t q = 2;
  std::size_t x3 = 2;
};

class GraphModel {
 public:
  GraphModel(GraphKind kind, GraphSizes sizes, std::vector<Conditional> components);

  GraphKind kind() const { return kind_; }
  const GraphSizes& sizes() const { return sizes_; }
  const std::vector<Conditional>& components() const { return components_; }
  const Conditional& component(std::string_view child) const;

  // Joint over every variable, latents included, in topological order.
  const JointTable& full_joint() const { return full_; }
  // Joint over (X1, X2, Y), or (X1, X2, X3, Y) for the three-feature kind.
  const JointTable& observable() const { return observable_; }

 private:
  GraphKind kind_;
  GraphSizes sizes_;
  std::vector<Conditional> components_;
  JointTable full_;
  JointTable observable_;
};

// Every conditional column drawn from a symmetric Dirichlet(concentration).
GraphModel random_graph_model(GraphKind kind, const GraphSizes& sizes, Stream& stream,
                              double concentration = 1.0);

}  // namespace spur
