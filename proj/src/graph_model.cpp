#include "spur/graph_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "spur/errors.hpp"

namespace spur {

std::string_view to_string(GraphKind kind) {
  switch (kind) {
    case GraphKind::kCausal: return "causal";
    case GraphKind::kAnticausal: return "anticausal";
    case GraphKind::kThreeFeature: return "three_feature";
  }
  return "?";
}

GraphKind parse_graph_kind(std::string_view name) {
  if (name == "causal") return GraphKind::kCausal;
  if (name == "anticausal") return GraphKind::kAnticausal;
  if (name == "three_feature") return GraphKind::kThreeFeature;
  throw InvalidArgument("unknown graph kind '" + std::string(name) + "'");
}

namespace {

struct Variable {
  std::string name;
  std::size_t size;
};

std::vector<Variable> variables_for(GraphKind kind, const GraphSizes& s) {
  switch (kind) {
    case GraphKind::kCausal:
      return {{"Z", s.z}, {"X1", s.x1}, {"X2", s.x2}, {"Y", s.y}};
    case GraphKind::kAnticausal:
      return {{"Z", s.z}, {"Y", s.y}, {"Q", s.q}, {"X1", s.x1}, {"X2", s.x2}};
    case GraphKind::kThreeFeature:
      return {{"Z", s.z}, {"X1", s.x1}, {"X2", s.x2}, {"X3", s.x3}, {"Y", s.y}};
  }
  return {};
}

// (child, parents) in topological order.
std::vector<std::pair<std::string, std::vector<std::string>>> structure_for(GraphKind kind) {
  switch (kind) {
    case GraphKind::kCausal:
      return {{"Z", {}}, {"X1", {"Z"}}, {"X2", {"Z"}}, {"Y", {"X1"}}};
    case GraphKind::kAnticausal:
      return {{"Z", {}}, {"Y", {"Z"}}, {"Q", {"Z"}}, {"X1", {"Y"}}, {"X2", {"Q"}}};
    case GraphKind::kThreeFeature:
      return {{"Z", {}}, {"X1", {"Z"}}, {"X2", {"Z"}}, {"X3", {}}, {"Y", {"X2", "X3"}}};
  }
  return {};
}

std::vector<std::string> observable_names(GraphKind kind) {
  if (kind == GraphKind::kThreeFeature) return {"X1", "X2", "X3", "Y"};
  return {"X1", "X2", "Y"};
}

}  // namespace

GraphModel::GraphModel(GraphKind kind, GraphSizes sizes, std::vector<Conditional> components)
    : kind_(kind), sizes_(sizes), components_(std::move(components)) {
  const auto vars = variables_for(kind, sizes_);
  std::map<std::string, std::size_t> pos, size_of;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (vars[i].size < 2) throw InvalidArgument("graph axis sizes must be at least 2");
    pos[vars[i].name] = i;
    size_of[vars[i].name] = vars[i].size;
  }
  const auto structure = structure_for(kind);
  if (components_.size() != structure.size()) throw InvalidArgument("wrong number of graph components");
  for (std::size_t c = 0; c < structure.size(); ++c) {
    const Conditional& comp = components_[c];
    if (comp.child != structure[c].first || comp.parents != structure[c].second)
      throw InvalidArgument("component " + comp.child + " does not match the graph structure");
    std::size_t configs = 1;
    for (const auto& p : comp.parents) configs *= size_of[p];
    if (comp.child_size != size_of[comp.child] || comp.parent_configs != configs ||
        comp.table.size() != comp.child_size * configs)
      throw InvalidArgument("component " + comp.child + " has the wrong shape");
    for (std::size_t col = 0; col < configs; ++col) {
      double s = 0.0;
      for (std::size_t v = 0; v < comp.child_size; ++v) {
        const double p = comp.at(v, col);
        if (!(p >= 0.0)) throw InvalidArgument("negative conditional probability");
        s += p;
      }
      if (std::fabs(s - 1.0) > JointTable::kTolerance)
        throw InvalidArgument("component " + comp.child + " column is not a probability vector");
    }
  }

  // Expand the product of conditionals over every joint assignment.
  std::vector<std::string> names;
  std::vector<std::size_t> dims;
  for (const auto& v : vars) {
    names.push_back(v.name);
    dims.push_back(v.size);
  }
  std::size_t cells = 1;
  for (std::size_t d : dims) cells *= d;
  std::vector<double> probs(cells, 0.0);
  std::vector<std::size_t> assign(vars.size(), 0);
  for (std::size_t flat = 0; flat < cells; ++flat) {
    std::size_t rem = flat;
    for (std::size_t i = vars.size(); i-- > 0;) {
      assign[i] = rem % dims[i];
      rem /= dims[i];
    }
    double p = 1.0;
    for (const Conditional& comp : components_) {
      std::size_t config = 0;
      for (const auto& parent : comp.parents) config = config * size_of[parent] + assign[pos[parent]];
      p *= comp.at(assign[pos[comp.child]], config);
    }
    probs[flat] = p;
  }
  double total = 0.0;
  for (double p : probs) total += p;
  for (double& p : probs) p /= total;
  full_ = JointTable(names, dims, std::move(probs));
  observable_ = project(full_, observable_names(kind));
}

const Conditional& GraphModel::component(std::string_view child) const {
  for (const auto& c : components_)
    if (c.child == child) return c;
  throw InvalidArgument("no component for " + std::string(child));
}

GraphModel random_graph_model(GraphKind kind, const GraphSizes& sizes, Stream& stream, double concentration) {
  if (!(concentration > 0.0)) throw InvalidArgument("concentration must be positive");
  const auto vars = variables_for(kind, sizes);
  std::map<std::string, std::size_t> size_of;
  for (const auto& v : vars) {
    if (v.size < 2) throw InvalidArgument("graph axis sizes must be at least 2");
    size_of[v.name] = v.size;
  }
  std::vector<Conditional> comps;
  for (const auto& [child, parents] : structure_for(kind)) {
    Conditional c;
    c.child = child;
    c.parents = parents;
    c.child_size = size_of[child];
    for (const auto& p : parents) c.parent_configs *= size_of[p];
    c.table.assign(c.child_size * c.parent_configs, 0.0);
    for (std::size_t col = 0; col < c.parent_configs; ++col) {
      const auto column = stream.dirichlet(c.child_size, concentration);
      for (std::size_t v = 0; v < c.child_size; ++v) c.table[v * c.parent_configs + col] = column[v];
    }
    comps.push_back(std::move(c));
  }
  return GraphModel(kind, sizes, std::move(comps));
}

}  // namespace spur
