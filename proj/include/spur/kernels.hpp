#pragma once

// Dense double-precision inner loops used by the training code.
//
// Every kernel has a portable scalar reference in kernels::scalar and, on
// x86-64 builds, an AVX2+FMA variant in kernels::avx2. The free functions in
// namespace kernels forward to whichever table was selected at startup; the
// selection can be pinned with SPUR_SIMD=scalar|avx2 in the environment.

#include <cstddef>
#include <span>
#include <string_view>

namespace spur::kernels {

enum class Isa { kScalar, kAvx2 };

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  double (*abs_sum)(const double* x, std::size_t n);
  // Adam step with precomputed bias corrections: step = lr / (1 - b1^t),
  // v_corr = 1 / (1 - b2^t).
  void (*adam)(double* w, const double* g, double* m, double* v, std::size_t n,
               double step, double b1, double b2, double v_corr, double eps);
};

namespace scalar {
const KernelTable& table();
}
namespace avx2 {
// nullptr when the build or the CPU lacks AVX2/FMA.
const KernelTable* table();
}

const KernelTable& active();
// Forces a specific table; returns false if unavailable on this machine.
bool select(Isa isa);
std::string_view isa_name(Isa isa);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), y.size());
}
inline double abs_sum(std::span<const double> x) {
  return active().abs_sum(x.data(), x.size());
}

// C (m x n) = A (m x k) * B (k x n), all row-major. C must not alias A or B.
void matmul(const double* a, const double* b, double* c, std::size_t m,
            std::size_t k, std::size_t n);

}  // namespace spur::kernels
