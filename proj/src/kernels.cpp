#include "fedforget/kernels.hpp"

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fedforget::kernels {

namespace {

inline void forward_row(Dims d, const double* x, const double* w,
                        const double* b, double* z) {
  for (std::size_t j = 0; j < d.out; ++j) z[j] = b[j];
  for (std::size_t i = 0; i < d.in; ++i) {
    const double xi = x[i];
    const double* wi = w + i * d.out;
    for (std::size_t j = 0; j < d.out; ++j) z[j] += xi * wi[j];
  }
}

inline void weight_row(Dims d, std::size_t i, const double* a, const double* dz,
                       double* dw) {
  double* dwi = dw + i * d.out;
  for (std::size_t j = 0; j < d.out; ++j) dwi[j] = 0.0;
  for (std::size_t r = 0; r < d.rows; ++r) {
    const double ari = a[r * d.in + i];
    if (ari == 0.0) continue;
    const double* dzr = dz + r * d.out;
    for (std::size_t j = 0; j < d.out; ++j) dwi[j] += ari * dzr[j];
  }
}

inline void bias_grad(Dims d, const double* dz, double* db) {
  for (std::size_t j = 0; j < d.out; ++j) db[j] = 0.0;
  for (std::size_t r = 0; r < d.rows; ++r) {
    const double* dzr = dz + r * d.out;
    for (std::size_t j = 0; j < d.out; ++j) db[j] += dzr[j];
  }
}

inline void input_row(Dims d, const double* dz, const double* w, double* da) {
  for (std::size_t i = 0; i < d.in; ++i) {
    const double* wi = w + i * d.out;
    double s = 0.0;
    for (std::size_t j = 0; j < d.out; ++j) s += dz[j] * wi[j];
    da[i] = s;
  }
}

inline int argmax(const double* z, std::size_t cols) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < cols; ++j) {
    if (z[j] > z[best]) best = j;
  }
  return static_cast<int>(best);
}

}  // namespace

namespace serial {

void dense_forward(Dims d, std::span<const double> x, std::span<const double> w,
                   std::span<const double> b, std::span<double> z) {
  for (std::size_t r = 0; r < d.rows; ++r) {
    forward_row(d, x.data() + r * d.in, w.data(), b.data(), z.data() + r * d.out);
  }
}

void dense_grad_weights(Dims d, std::span<const double> a,
                        std::span<const double> dz, std::span<double> dw,
                        std::span<double> db) {
  for (std::size_t i = 0; i < d.in; ++i) weight_row(d, i, a.data(), dz.data(), dw.data());
  bias_grad(d, dz.data(), db.data());
}

void dense_grad_input(Dims d, std::span<const double> dz,
                      std::span<const double> w, std::span<double> da) {
  for (std::size_t r = 0; r < d.rows; ++r) {
    input_row(d, dz.data() + r * d.out, w.data(), da.data() + r * d.in);
  }
}

void argmax_rows(std::size_t rows, std::size_t cols, std::span<const double> z,
                 std::span<int> out) {
  for (std::size_t r = 0; r < rows; ++r) out[r] = argmax(z.data() + r * cols, cols);
}

}  // namespace serial

namespace parallel {

void dense_forward(Dims d, std::span<const double> x, std::span<const double> w,
                   std::span<const double> b, std::span<double> z) {
  const auto rows = static_cast<std::int64_t>(d.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) {
    forward_row(d, x.data() + r * d.in, w.data(), b.data(), z.data() + r * d.out);
  }
}

void dense_grad_weights(Dims d, std::span<const double> a,
                        std::span<const double> dz, std::span<double> dw,
                        std::span<double> db) {
  const auto in = static_cast<std::int64_t>(d.in);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < in; ++i) {
    weight_row(d, static_cast<std::size_t>(i), a.data(), dz.data(), dw.data());
  }
  bias_grad(d, dz.data(), db.data());
}

void dense_grad_input(Dims d, std::span<const double> dz,
                      std::span<const double> w, std::span<double> da) {
  const auto rows = static_cast<std::int64_t>(d.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) {
    input_row(d, dz.data() + r * d.out, w.data(), da.data() + r * d.in);
  }
}

void argmax_rows(std::size_t rows, std::size_t cols, std::span<const double> z,
                 std::span<int> out) {
  const auto n = static_cast<std::int64_t>(rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < n; ++r) out[r] = argmax(z.data() + r * cols, cols);
}

}  // namespace parallel

int max_threads() noexcept {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace fedforget::kernels
