#include "smd/kernels.hpp"

#include "smd/parallel.hpp"

namespace smd::kern {
namespace {

inline void matmul_row(const double* a, const double* b, double* c, long i, long k, long n) {
  double* ci = c + i * n;
  const double* ai = a + i * k;
  for (long j = 0; j < n; ++j) ci[j] = 0.0;
  for (long p = 0; p < k; ++p) {
    double av = ai[p];
    const double* bp = b + p * n;
    for (long j = 0; j < n; ++j) ci[j] += av * bp[j];
  }
}

}  // namespace

void matmul_serial(const double* a, const double* b, double* c, long m, long k, long n) {
  for (long i = 0; i < m; ++i) matmul_row(a, b, c, i, k, n);
}

void matmul(const double* a, const double* b, double* c, long m, long k, long n, int nthreads) {
  if (nthreads <= 1 || m == 1 || smd::in_parallel_region()) {
    matmul_serial(a, b, c, m, k, n);
    return;
  }
  parallel_for(m, nthreads, [&](long i) { matmul_row(a, b, c, i, k, n); });
}

}  // namespace smd::kern
