#pragma once

// Row-major GEMM used by the conv (im2col) and linear kernels. Backed by
// cblas unless MHNN_NO_BLAS is defined, in which case a plain triple loop
// is used. Thread count is pinned to 1 so reduction order, and therefore
// every downstream artifact, is reproducible.

#include <cstddef>

#ifndef MHNN_NO_BLAS
#include <cblas.h>
extern "C" void openblas_set_num_threads(int);
#endif

namespace mhnn::blas {

inline void pin_single_thread() {
#ifndef MHNN_NO_BLAS
  openblas_set_num_threads(1);
#endif
}

#ifndef MHNN_NO_BLAS

inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
                 const float* a, int lda, const float* b, int ldb, float beta,
                 float* c, int ldc) {
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b,
              ldb, beta, c, ldc);
}

inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
                 const double* a, int lda, const double* b, int ldb,
                 double beta, double* c, int ldc) {
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b,
              ldb, beta, c, ldc);
}

#else

template <typename T>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, T alpha, const T* a,
          int lda, const T* b, int ldb, T beta, T* c, int ldc) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      T acc = 0;
      for (int p = 0; p < k; ++p) {
        const T av = trans_a ? a[p * lda + i] : a[i * lda + p];
        const T bv = trans_b ? b[j * ldb + p] : b[p * ldb + j];
        acc += av * bv;
      }
      c[i * ldc + j] = alpha * acc + beta * c[i * ldc + j];
    }
  }
}

#endif

}  // namespace mhnn::blas
