#pragma once

// Dense-layer kernels over row-major matrices.
//
// `serial` is the reference; `parallel` splits the outer loop across OpenMP
// threads. Each output element is accumulated in the same order in both, so
// the results are bitwise identical (the tests rely on that).

#include <cstddef>
#include <span>

namespace fedforget::kernels {

struct Dims {
  std::size_t rows;  // batch rows
  std::size_t in;    // input features
  std::size_t out;   // output features
};

namespace serial {

/// Z = X * W + b, with X rows x in, W in x out, Z rows x out.
void dense_forward(Dims d, std::span<const double> x, std::span<const double> w,
                   std::span<const double> b, std::span<double> z);
/// dW = A^T * dZ and db = column sums of dZ (both overwritten).
void dense_grad_weights(Dims d, std::span<const double> a,
                        std::span<const double> dz, std::span<double> dw,
                        std::span<double> db);
/// dA = dZ * W^T.
void dense_grad_input(Dims d, std::span<const double> dz,
                      std::span<const double> w, std::span<double> da);
/// Row-wise argmax, ties to the lowest column.
void argmax_rows(std::size_t rows, std::size_t cols, std::span<const double> z,
                 std::span<int> out);

}  // namespace serial

namespace parallel {

void dense_forward(Dims d, std::span<const double> x, std::span<const double> w,
                   std::span<const double> b, std::span<double> z);
void dense_grad_weights(Dims d, std::span<const double> a,
                        std::span<const double> dz, std::span<double> dw,
                        std::span<double> db);
void dense_grad_input(Dims d, std::span<const double> dz,
                      std::span<const double> w, std::span<double> da);
void argmax_rows(std::size_t rows, std::size_t cols, std::span<const double> z,
                 std::span<int> out);

}  // namespace parallel

/// Row count above which the library switches to the parallel kernels.
inline constexpr std::size_t kParallelRowThreshold = 256;

/// Number of OpenMP threads available (1 when built without OpenMP).
int max_threads() noexcept;

}  // namespace fedforget::kernels
