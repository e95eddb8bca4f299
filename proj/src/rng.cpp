#include "spur/rng.hpp"

namespace spur {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Stream Stream::derive(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
  return Stream(splitmix64(splitmix64(splitmix64(master) ^ a) ^ (b * 0xd1b54a32d192ed03ULL)));
}

std::size_t Stream::index(std::size_t n) {
  // Rejection keeps the draw exactly uniform.
  const std::uint64_t range = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % range);
}

double Stream::gamma(double shape) {
  std::gamma_distribution<double> dist(shape, 1.0);
  return dist(engine_);
}

std::vector<double> Stream::dirichlet(std::size_t k, double concentration) {
  std::vector<double> out(k);
  double total = 0.0;
  for (;;) {
    total = 0.0;
    for (auto& x : out) {
      x = gamma(concentration);
      total += x;
    }
    if (total > 0.0) break;
  }
  for (auto& x : out) x /= total;
  return out;
}

}  // namespace spur
