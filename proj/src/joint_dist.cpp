#include "spur/joint_dist.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "spur/errors.hpp"

namespace spur {

namespace {

std::vector<std::size_t> make_strides(const std::vector<std::size_t>& sizes) {
  std::vector<std::size_t> strides(sizes.size());
  std::size_t s = 1;
  for (std::size_t i = sizes.size(); i-- > 0;) {
    strides[i] = s;
    s *= sizes[i];
  }
  return strides;
}

std::size_t product(const std::vector<std::size_t>& sizes) {
  return std::accumulate(sizes.begin(), sizes.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

JointTable::JointTable(std::vector<std::string> names, std::vector<std::size_t> sizes,
                       std::vector<double> probs)
    : names_(std::move(names)), sizes_(std::move(sizes)), probs_(std::move(probs)) {
  if (names_.size() != sizes_.size()) throw InvalidArgument("axis names and sizes differ in length");
  if (sizes_.empty()) throw InvalidArgument("table needs at least one axis");
  for (std::size_t i = 0; i < names_.size(); ++i)
    for (std::size_t j = i + 1; j < names_.size(); ++j)
      if (names_[i] == names_[j]) throw InvalidArgument("duplicate axis name '" + names_[i] + "'");
  for (std::size_t s : sizes_)
    if (s == 0) throw InvalidArgument("axis sizes must be positive");
  if (probs_.size() != product(sizes_)) throw InvalidArgument("probability count does not match axis sizes");
  double total = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidArgument("negative or non-finite probability");
    total += p;
  }
  if (std::fabs(total - 1.0) > kTolerance) {
    std::ostringstream msg;
    msg << "probabilities sum to " << total << ", not 1";
    throw InvalidArgument(msg.str());
  }
  strides_ = make_strides(sizes_);
}

JointTable JointTable::from_weights(std::vector<std::string> names, std::vector<std::size_t> sizes,
                                    std::vector<double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw InvalidArgument("negative weight");
    total += w;
  }
  if (!(total > 0.0)) throw InvalidArgument("weights sum to zero");
  for (double& w : weights) w /= total;
  return JointTable(std::move(names), std::move(sizes), std::move(weights));
}

std::size_t JointTable::axis(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw InvalidArgument("unknown axis '" + name + "'");
  return static_cast<std::size_t>(it - names_.begin());
}

std::size_t JointTable::flat_index(std::span<const std::size_t> outcome) const {
  std::size_t idx = 0;
  for (std::size_t i = 0; i < sizes_.size(); ++i) idx += outcome[i] * strides_[i];
  return idx;
}

std::vector<std::size_t> JointTable::outcome(std::size_t flat) const {
  std::vector<std::size_t> out(sizes_.size());
  for (std::size_t i = 0; i < sizes_.size(); ++i) {
    out[i] = flat / strides_[i];
    flat %= strides_[i];
  }
  return out;
}

nlohmann::json JointTable::to_json() const {
  return nlohmann::json{{"axes", names_}, {"sizes", sizes_}, {"probs", probs_}};
}

JointTable JointTable::from_json(const nlohmann::json& doc) {
  try {
    return JointTable(doc.at("axes").get<std::vector<std::string>>(),
                      doc.at("sizes").get<std::vector<std::size_t>>(),
                      doc.at("probs").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed table document: ") + e.what());
  }
}

JointTable project(const JointTable& table, std::span<const std::size_t> keep_axes,
                   std::optional<Condition> condition) {
  std::vector<std::string> names;
  std::vector<std::size_t> sizes;
  for (std::size_t a : keep_axes) {
    if (a >= table.rank()) throw InvalidArgument("axis out of range");
    if (std::count(keep_axes.begin(), keep_axes.end(), a) != 1) throw InvalidArgument("duplicate axis");
    names.push_back(table.name(a));
    sizes.push_back(table.size(a));
  }
  if (condition && (condition->axis >= table.rank() || condition->value >= table.size(condition->axis)))
    throw InvalidArgument("conditioning event out of range");

  const auto out_strides = make_strides(sizes);
  std::vector<double> acc(product(sizes), 0.0);
  double mass = 0.0;
  const auto probs = table.probs();
  for (std::size_t flat = 0; flat < probs.size(); ++flat) {
    if (probs[flat] == 0.0) continue;
    if (condition && (flat / table.stride(condition->axis)) % table.size(condition->axis) != condition->value)
      continue;
    std::size_t idx = 0;
    for (std::size_t k = 0; k < keep_axes.size(); ++k) {
      const std::size_t a = keep_axes[k];
      idx += ((flat / table.stride(a)) % table.size(a)) * out_strides[k];
    }
    acc[idx] += probs[flat];
    mass += probs[flat];
  }
  if (!(mass > 0.0)) throw InvalidArgument("conditioning on a zero-probability event");
  for (double& p : acc) p /= mass;
  return JointTable(std::move(names), std::move(sizes), std::move(acc));
}

JointTable project(const JointTable& table, const std::vector<std::string>& keep_axes,
                   std::optional<std::pair<std::string, std::size_t>> condition) {
  std::vector<std::size_t> idx;
  for (const auto& n : keep_axes) idx.push_back(table.axis(n));
  std::optional<Condition> c;
  if (condition) c = Condition{table.axis(condition->first), condition->second};
  return project(table, idx, c);
}

std::vector<double> marginal(const JointTable& table, std::size_t axis) {
  std::vector<double> out(table.size(axis), 0.0);
  const auto probs = table.probs();
  const std::size_t stride = table.stride(axis), n = table.size(axis);
  for (std::size_t flat = 0; flat < probs.size(); ++flat) out[(flat / stride) % n] += probs[flat];
  return out;
}

Sampler::Sampler(const JointTable& table) : table_(table), cdf_(table.num_cells()) {
  std::partial_sum(table_.probs().begin(), table_.probs().end(), cdf_.begin());
}

std::size_t Sampler::draw_cell(Stream& stream) const {
  const double u = stream.uniform() * cdf_.back();
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  std::size_t idx = static_cast<std::size_t>(it - cdf_.begin());
  if (idx >= cdf_.size()) idx = cdf_.size() - 1;
  // Never land on a zero-probability cell at the top of the cdf.
  while (idx > 0 && table_.probs()[idx] == 0.0) --idx;
  return idx;
}

std::vector<std::vector<std::size_t>> sample(const JointTable& table, Stream& stream, std::size_t n) {
  std::vector<std::vector<std::size_t>> out;
  if (n == 0) return out;
  Sampler sampler(table);
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(table.outcome(sampler.draw_cell(stream)));
  return out;
}

ToyConfig::ToyConfig(std::size_t d2, double nu) : d2_(d2), nu_(nu) {
  if (d2 < 4) throw InvalidArgument("d2 must be at least 4");
  if (!(nu >= 0.0 && nu <= 0.5)) throw InvalidArgument("flip rate must lie in [0, 0.5]");
  const auto m = static_cast<long>(std::lround(2.0 * nu * static_cast<double>(d2)));
  const double half = static_cast<double>(d2) / 2.0;
  const double lo = half - static_cast<double>((m + 1) / 2) + 1.0;
  const double hi = half + static_cast<double>(m / 2);
  in_zone_.assign(d2, false);
  for (std::size_t i = 1; i <= d2; ++i) {
    const double x = static_cast<double>(i);
    if (x >= lo && x <= hi) {
      zone_.push_back(i);
      in_zone_[i - 1] = true;
    }
  }
  if (static_cast<long>(zone_.size()) != m)
    throw InvalidArgument("zone bookkeeping yields " + std::to_string(zone_.size()) + " indices, expected " +
                          std::to_string(m));
}

double ToyConfig::x1_only_accuracy() const {
  return 1.0 - static_cast<double>(zone_.size()) / (2.0 * static_cast<double>(d2_));
}

JointTable build_toy(const ToyConfig& config) {
  const std::size_t d2 = config.d2();
  std::vector<double> probs(2 * d2 * 2, 0.0);
  for (const SupportPoint& pt : enumerate_support(config)) probs[(pt.x1 * d2 + pt.x2) * 2 + pt.y] = pt.prob;
  return JointTable({"X1", "X2", "Y"}, {2, d2, 2}, std::move(probs));
}

std::vector<SupportPoint> enumerate_support(const ToyConfig& config) {
  std::vector<SupportPoint> pts;
  const double px2 = 1.0 / static_cast<double>(config.d2());
  for (std::size_t x2 = 0; x2 < config.d2(); ++x2) {
    const std::size_t y = ToyConfig::label(x2);
    if (config.in_zone(x2)) {
      pts.push_back({0, x2, y, px2 / 2.0});
      pts.push_back({1, x2, y, px2 / 2.0});
    } else {
      pts.push_back({y, x2, y, px2});
    }
  }
  return pts;
}

}  // namespace spur
