#pragma once

#include <cstddef>

namespace sflab::kernels {

enum class Backend { serial, openmp };

// C[n x m] = A[n x k] * B[k x m], all row-major. Both backends sum in the same
// order per output row, so results are bitwise identical.
void matmul(const double* A, const double* B, double* C, std::size_t n, std::size_t k, std::size_t m, Backend be);

// B[m x n] = A[n x m]^T
void transpose(const double* A, double* B, std::size_t n, std::size_t m, Backend be);

// Y[i, :] += b for each of n rows, then Y = tanh(Y) if act
void bias_act(double* Y, const double* b, std::size_t n, std::size_t m, bool act, Backend be);

namespace serial {
void matmul(const double* A, const double* B, double* C, std::size_t n, std::size_t k, std::size_t m);
}
namespace omp {
void matmul(const double* A, const double* B, double* C, std::size_t n, std::size_t k, std::size_t m);
}

}  // namespace sflab::kernels
