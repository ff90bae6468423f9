#include "maven/kernels.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace maven::kernels {

namespace {

Exec g_exec = Exec::Auto;

// Below this many multiply-adds the thread fork costs more than it saves.
constexpr std::size_t kParallelWork = 1u << 15;

bool use_parallel(std::size_t work) {
  switch (g_exec) {
    case Exec::Serial: return false;
    case Exec::Parallel: return openmp_available();
    case Exec::Auto: return openmp_available() && max_threads() > 1 && work >= kParallelWork;
  }
  return false;
}

inline void matmul_row(const double* a_row, std::span<const double> b, double* c_row, std::size_t k,
                       std::size_t n, bool accumulate) {
  if (!accumulate) std::fill(c_row, c_row + n, 0.0);
  for (std::size_t p = 0; p < k; ++p) {
    const double aip = a_row[p];
    const double* b_row = b.data() + p * n;
    for (std::size_t j = 0; j < n; ++j) c_row[j] += aip * b_row[j];
  }
}

inline void matmul_bt_row(const double* a_row, std::span<const double> b, double* c_row, std::size_t k,
                          std::size_t n, bool accumulate) {
  for (std::size_t j = 0; j < n; ++j) {
    const double* b_row = b.data() + j * k;
    double s = 0.0;
    for (std::size_t p = 0; p < k; ++p) s += a_row[p] * b_row[p];
    c_row[j] = accumulate ? c_row[j] + s : s;
  }
}

inline void matmul_at_row(std::span<const double> a, std::span<const double> b, double* c_row, std::size_t i,
                          std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  if (!accumulate) std::fill(c_row, c_row + n, 0.0);
  for (std::size_t p = 0; p < k; ++p) {
    const double api = a[p * m + i];
    const double* b_row = b.data() + p * n;
    for (std::size_t j = 0; j < n; ++j) c_row[j] += api * b_row[j];
  }
}

inline void softmax_row(const double* x, const unsigned char* mask, double* y, std::size_t cols) {
  double mx = -INFINITY;
  for (std::size_t j = 0; j < cols; ++j) {
    if (!mask || mask[j]) mx = std::max(mx, x[j]);
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    const double e = (!mask || mask[j]) ? std::exp(x[j] - mx) : 0.0;
    y[j] = e;
    sum += e;
  }
  const double inv = 1.0 / sum;
  for (std::size_t j = 0; j < cols; ++j) y[j] *= inv;
}

inline void layer_norm_row(const double* x, double* xhat, double* inv_std, std::size_t cols, double eps) {
  double mean = 0.0;
  for (std::size_t j = 0; j < cols; ++j) mean += x[j];
  mean /= static_cast<double>(cols);
  double var = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    const double d = x[j] - mean;
    var += d * d;
  }
  var /= static_cast<double>(cols);
  const double is = 1.0 / std::sqrt(var + eps);
  *inv_std = is;
  for (std::size_t j = 0; j < cols; ++j) xhat[j] = (x[j] - mean) * is;
}

}  // namespace

void set_default_exec(Exec exec) { g_exec = exec; }
Exec default_exec() { return g_exec; }

bool openmp_available() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void matmul_serial(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
                   std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) matmul_row(a.data() + i * k, b, c.data() + i * n, k, n, accumulate);
}

void matmul_parallel(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
                     std::size_t k, std::size_t n, bool accumulate) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    matmul_row(a.data() + r * k, b, c.data() + r * n, k, n, accumulate);
  }
}

void matmul_bt_serial(std::span<const double> a, std::span<const double> b, std::span<double> c,
                      std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) matmul_bt_row(a.data() + i * k, b, c.data() + i * n, k, n, accumulate);
}

void matmul_bt_parallel(std::span<const double> a, std::span<const double> b, std::span<double> c,
                        std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    matmul_bt_row(a.data() + r * k, b, c.data() + r * n, k, n, accumulate);
  }
}

void matmul_at_serial(std::span<const double> a, std::span<const double> b, std::span<double> c,
                      std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) matmul_at_row(a, b, c.data() + i * n, i, m, k, n, accumulate);
}

void matmul_at_parallel(std::span<const double> a, std::span<const double> b, std::span<double> c,
                        std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    matmul_at_row(a, b, c.data() + r * n, r, m, k, n, accumulate);
  }
}

void softmax_rows_serial(std::span<const double> x, std::span<const unsigned char> mask, std::span<double> y,
                         std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    softmax_row(x.data() + i * cols, mask.empty() ? nullptr : mask.data() + i * cols, y.data() + i * cols, cols);
  }
}

void softmax_rows_parallel(std::span<const double> x, std::span<const unsigned char> mask, std::span<double> y,
                           std::size_t rows, std::size_t cols) {
  const auto n = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(i);
    softmax_row(x.data() + r * cols, mask.empty() ? nullptr : mask.data() + r * cols, y.data() + r * cols, cols);
  }
}

void layer_norm_rows_serial(std::span<const double> x, std::span<double> xhat, std::span<double> inv_std,
                            std::size_t rows, std::size_t cols, double eps) {
  for (std::size_t i = 0; i < rows; ++i) {
    layer_norm_row(x.data() + i * cols, xhat.data() + i * cols, inv_std.data() + i, cols, eps);
  }
}

void layer_norm_rows_parallel(std::span<const double> x, std::span<double> xhat, std::span<double> inv_std,
                              std::size_t rows, std::size_t cols, double eps) {
  const auto n = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(i);
    layer_norm_row(x.data() + r * cols, xhat.data() + r * cols, inv_std.data() + r, cols, eps);
  }
}

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
            std::size_t k, std::size_t n, bool accumulate) {
  if (use_parallel(m * k * n)) {
    matmul_parallel(a, b, c, m, k, n, accumulate);
  } else {
    matmul_serial(a, b, c, m, k, n, accumulate);
  }
}

void matmul_bt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
               std::size_t k, std::size_t n, bool accumulate) {
  if (use_parallel(m * k * n)) {
    matmul_bt_parallel(a, b, c, m, k, n, accumulate);
  } else {
    matmul_bt_serial(a, b, c, m, k, n, accumulate);
  }
}

void matmul_at(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
               std::size_t k, std::size_t n, bool accumulate) {
  if (use_parallel(m * k * n)) {
    matmul_at_parallel(a, b, c, m, k, n, accumulate);
  } else {
    matmul_at_serial(a, b, c, m, k, n, accumulate);
  }
}

void softmax_rows(std::span<const double> x, std::span<const unsigned char> mask, std::span<double> y,
                  std::size_t rows, std::size_t cols) {
  if (use_parallel(rows * cols * 8)) {
    softmax_rows_parallel(x, mask, y, rows, cols);
  } else {
    softmax_rows_serial(x, mask, y, rows, cols);
  }
}

void layer_norm_rows(std::span<const double> x, std::span<double> xhat, std::span<double> inv_std,
                     std::size_t rows, std::size_t cols, double eps) {
  if (use_parallel(rows * cols * 4)) {
    layer_norm_rows_parallel(x, xhat, inv_std, rows, cols, eps);
  } else {
    layer_norm_rows_serial(x, xhat, inv_std, rows, cols, eps);
  }
}

}  // namespace maven::kernels
