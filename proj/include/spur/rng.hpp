#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace spur {

// Deterministic random stream. One stream per worker; never share.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : engine_(seed) {}

  // Independent stream for (master, a, b), e.g. (seed, cell index, seed index).
  static Stream derive(std::uint64_t master, std::uint64_t a = 0, std::uint64_t b = 0);

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform in {0, ..., n-1}; n > 0.
  std::size_t index(std::size_t n);
  bool bernoulli(double p) { return uniform() < p; }
  double gamma(double shape);
  // Symmetric Dirichlet draw of dimension k.
  std::vector<double> dirichlet(std::size_t k, double concentration);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace spur
