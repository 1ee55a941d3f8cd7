#include "psgan/gemm.hpp"

#include <cblas.h>

#include <cstdlib>

extern "C" void openblas_set_num_threads(int) __attribute__((weak));

namespace psgan {

namespace {

// The network sizes here are small enough that BLAS worker threads cost
// more than they save; pin to one thread unless the user overrides.
struct BlasThreadInit {
    BlasThreadInit() {
        if (openblas_set_num_threads && !std::getenv("OPENBLAS_NUM_THREADS"))
            openblas_set_num_threads(1);
    }
};
const BlasThreadInit blas_thread_init;

}  // namespace

void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
          const float* a, int lda, const float* b, int ldb, float beta,
          float* c, int ldc) {
    cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda,
                b, ldb, beta, c, ldc);
}

void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
          const double* a, int lda, const double* b, int ldb, double beta,
          double* c, int ldc) {
    cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda,
                b, ldb, beta, c, ldc);
}

}  // namespace psgan
