#include "spur/kernels.hpp"

#include <cmath>

namespace spur::kernels::scalar {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double abs_sum(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::fabs(x[i]);
  return s;
}

void adam(double* w, const double* g, double* m, double* v, std::size_t n,
          double step, double b1, double b2, double v_corr, double eps) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
    w[i] -= step * m[i] / (std::sqrt(v[i] * v_corr) + eps);
  }
}

const KernelTable kTable{Isa::kScalar, &dot, &axpy, &abs_sum, &adam};

}  // namespace

const KernelTable& table() { return kTable; }

}  // namespace spur::kernels::scalar
