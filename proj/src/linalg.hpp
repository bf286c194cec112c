#pragma once

// Internal dense matmul kernels. Backed by CBLAS (OpenBLAS) when available,
// pinned to one thread for determinism; a portable loop fallback otherwise.

namespace qatlaw::linalg {

// C[m,n] = A[m,k] * B[k,n]
void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n);
// C[m,n] = A[m,k] * B[n,k]^T
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n);
// C[m,n] = A[k,m]^T * B[k,n]
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n);

}  // namespace qatlaw::linalg
