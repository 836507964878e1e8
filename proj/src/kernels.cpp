#include "sflab/kernels.hpp"

#include <cmath>

namespace sflab::kernels {

namespace {

inline void row_product(const double* a, const double* B, double* c, std::size_t k, std::size_t m) {
    for (std::size_t j = 0; j < m; ++j) c[j] = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
        const double s = a[p];
        const double* b = B + p * m;
        for (std::size_t j = 0; j < m; ++j) c[j] += s * b[j];
    }
}

}  // namespace

void serial::matmul(const double* A, const double* B, double* C, std::size_t n, std::size_t k, std::size_t m) {
    for (std::size_t i = 0; i < n; ++i) row_product(A + i * k, B, C + i * m, k, m);
}

void omp::matmul(const double* A, const double* B, double* C, std::size_t n, std::size_t k, std::size_t m) {
    const long nn = static_cast<long>(n);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < nn; ++i) row_product(A + i * k, B, C + i * m, k, m);
}

void matmul(const double* A, const double* B, double* C, std::size_t n, std::size_t k, std::size_t m, Backend be) {
    if (be == Backend::openmp)
        omp::matmul(A, B, C, n, k, m);
    else
        serial::matmul(A, B, C, n, k, m);
}

void transpose(const double* A, double* B, std::size_t n, std::size_t m, Backend be) {
    const long mm = static_cast<long>(m);
#pragma omp parallel for schedule(static) if (be == Backend::openmp)
    for (long j = 0; j < mm; ++j)
        for (std::size_t i = 0; i < n; ++i) B[j * n + i] = A[i * m + j];
}

void bias_act(double* Y, const double* b, std::size_t n, std::size_t m, bool act, Backend be) {
    const long nn = static_cast<long>(n);
#pragma omp parallel for schedule(static) if (be == Backend::openmp)
    for (long i = 0; i < nn; ++i) {
        double* y = Y + i * m;
        for (std::size_t j = 0; j < m; ++j) {
            y[j] += b[j];
            if (act) y[j] = std::tanh(y[j]);
        }
    }
}

}  // namespace sflab::kernels
