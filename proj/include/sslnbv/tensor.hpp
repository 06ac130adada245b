#ifndef SSLNBV_TENSOR_HPP
#define SSLNBV_TENSOR_HPP

#include <cstddef>
#include <vector>

namespace sslnbv {

// Row-major dense tensor of doubles. Rank 1 or 2 is all the network needs.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(int n) : shape{n}, data(static_cast<std::size_t>(n), 0.0) {}
    Tensor(int r, int c)
        : shape{r, c}, data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), 0.0) {}

    int rows() const { return shape.empty() ? 0 : shape[0]; }
    int cols() const { return shape.size() < 2 ? 1 : shape[1]; }
    std::size_t numel() const { return data.size(); }

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols() + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols() + c]; }
};

namespace blas {

// C = alpha * op(A) * op(B) + beta * C, row-major. Thin cblas_dgemm wrapper.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a,
          const double* b, double beta, double* c);

// Caps the BLAS thread pool. Parallelism here lives in the OpenMP kernels;
// letting BLAS spawn its own threads on top oversubscribes the cores.
void set_threads(int n);

}  // namespace blas

}  // namespace sslnbv

#endif
