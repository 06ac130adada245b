#include "sslnbv/tensor.hpp"

#include <cblas.h>

namespace sslnbv::blas {

void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a,
          const double* b, double beta, double* c) {
    cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, trans_a ? m : k, b,
                trans_b ? k : n, beta, c, n);
}

void set_threads(int n) { openblas_set_num_threads(n); }

}  // namespace sslnbv::blas
