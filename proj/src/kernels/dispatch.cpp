#include <atomic>
#include <cstdlib>
#include <cstring>

#include "spur/kernels.hpp"

namespace spur::kernels {

#ifndef SPUR_HAVE_AVX2
namespace avx2 {
const KernelTable* table() { return nullptr; }
}
#endif

namespace {

const KernelTable* pick_default() {
  const char* env = std::getenv("SPUR_SIMD");
  if (env != nullptr && std::strcmp(env, "scalar") == 0) return &scalar::table();
  if (const KernelTable* t = avx2::table()) return t;
  return &scalar::table();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> current{pick_default()};
  return current;
}

}  // namespace

const KernelTable& active() { return *slot().load(std::memory_order_relaxed); }

bool select(Isa isa) {
  const KernelTable* t = isa == Isa::kScalar ? &scalar::table() : avx2::table();
  if (t == nullptr) return false;
  slot().store(t, std::memory_order_relaxed);
  return true;
}

std::string_view isa_name(Isa isa) { return isa == Isa::kScalar ? "scalar" : "avx2"; }

void matmul(const double* a, const double* b, double* c, std::size_t m,
            std::size_t k, std::size_t n) {
  const KernelTable& t = active();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = c + i * n;
    for (std::size_t j = 0; j < n; ++j) row[j] = 0.0;
    for (std::size_t p = 0; p < k; ++p) t.axpy(a[i * k + p], b + p * n, row, n);
  }
}

}  // namespace spur::kernels
