#pragma once

namespace smd::kern {

// c = a (m x k) * b (k x n), row-major. Serial reference.
void matmul_serial(const double* a, const double* b, double* c, long m, long k, long n);

// OpenMP variant parallelized over output rows. Each c[i][j] accumulates in
// the same k order as the serial kernel, so results are bitwise identical
// for any thread count.
void matmul(const double* a, const double* b, double* c, long m, long k, long n, int nthreads);

}  // namespace smd::kern
