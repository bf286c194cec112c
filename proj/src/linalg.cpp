#include "linalg.hpp"

#include <cstdlib>
#include <mutex>

#ifdef QATLAW_USE_CBLAS
#include <cblas.h>
extern "C" void openblas_set_num_threads(int) __attribute__((weak));
#endif

namespace qatlaw::linalg {

namespace {

std::once_flag g_init;

void init_backend() {
#ifdef QATLAW_USE_CBLAS
  // Single-threaded BLAS keeps results bit-identical regardless of the
  // machine's core count; run-level parallelism happens above this layer.
  setenv("OPENBLAS_NUM_THREADS", "1", 0);
  if (openblas_set_num_threads) openblas_set_num_threads(1);
#endif
}

}  // namespace

#ifdef QATLAW_USE_CBLAS

void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n) {
  std::call_once(g_init, init_backend);
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, m, n, k, 1.0, a, k, b, n, 0.0,
              c, n);
}

void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n) {
  std::call_once(g_init, init_backend);
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, m, n, k, 1.0, a, k, b, k, 0.0, c,
              n);
}

void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n) {
  std::call_once(g_init, init_backend);
  cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, m, n, k, 1.0, a, m, b, n, 0.0, c,
              n);
}

#else

void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n) {
  std::call_once(g_init, init_backend);
  for (int i = 0; i < m * n; ++i) c[i] = 0.0;
  for (int i = 0; i < m; ++i)
    for (int l = 0; l < k; ++l) {
      const double av = a[i * k + l];
      for (int j = 0; j < n; ++j) c[i * n + j] += av * b[l * n + j];
    }
}

void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n) {
  std::call_once(g_init, init_backend);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int l = 0; l < k; ++l) s += a[i * k + l] * b[j * k + l];
      c[i * n + j] = s;
    }
}

void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n) {
  std::call_once(g_init, init_backend);
  for (int i = 0; i < m * n; ++i) c[i] = 0.0;
  for (int l = 0; l < k; ++l)
    for (int i = 0; i < m; ++i) {
      const double av = a[l * m + i];
      for (int j = 0; j < n; ++j) c[i * n + j] += av * b[l * n + j];
    }
}

#endif

}  // namespace qatlaw::linalg
