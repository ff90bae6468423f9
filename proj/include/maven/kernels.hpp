#pragma once

#include <cstddef>
#include <span>

// Raw row-major f64 kernels. Every kernel has a serial reference and an
// OpenMP variant that partitions output rows across threads; each output
// element is accumulated in the same order by both, so results are
// bit-identical. The dispatching entry points pick the parallel variant
// above a work threshold when built with OpenMP.
namespace maven::kernels {

enum class Exec { Auto, Serial, Parallel };

void set_default_exec(Exec exec);
Exec default_exec();
bool openmp_available();
int max_threads();

// c (m x n) = a (m x k) * b (k x n); adds into c when accumulate is set.
void matmul_serial(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);
void matmul_parallel(std::span<const double> a, std::span<const double> b, std::span<double> c,
                     std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);

// c (m x n) = a (m x k) * b^T, with b stored (n x k).
void matmul_bt_serial(std::span<const double> a, std::span<const double> b, std::span<double> c,
                      std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);
void matmul_bt_parallel(std::span<const double> a, std::span<const double> b, std::span<double> c,
                        std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);

// c (m x n) = a^T * b, with a stored (k x m) and b stored (k x n).
void matmul_at_serial(std::span<const double> a, std::span<const double> b, std::span<double> c,
                      std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);
void matmul_at_parallel(std::span<const double> a, std::span<const double> b, std::span<double> c,
                        std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);

// Row softmax with max subtraction. mask (rows x cols, nonzero = keep) may be
// empty; masked entries get exactly zero weight. A fully masked row is an error
// for the caller to prevent.
void softmax_rows_serial(std::span<const double> x, std::span<const unsigned char> mask, std::span<double> y,
                         std::size_t rows, std::size_t cols);
void softmax_rows_parallel(std::span<const double> x, std::span<const unsigned char> mask, std::span<double> y,
                           std::size_t rows, std::size_t cols);

// Per-row normalization: xhat = (x - mean) / sqrt(var + eps), population var.
// inv_std receives one value per row.
void layer_norm_rows_serial(std::span<const double> x, std::span<double> xhat, std::span<double> inv_std,
                            std::size_t rows, std::size_t cols, double eps);
void layer_norm_rows_parallel(std::span<const double> x, std::span<double> xhat, std::span<double> inv_std,
                              std::size_t rows, std::size_t cols, double eps);

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
            std::size_t k, std::size_t n, bool accumulate = false);
void matmul_bt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
               std::size_t k, std::size_t n, bool accumulate = false);
void matmul_at(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
               std::size_t k, std::size_t n, bool accumulate = false);
void softmax_rows(std::span<const double> x, std::span<const unsigned char> mask, std::span<double> y,
                  std::size_t rows, std::size_t cols);
void layer_norm_rows(std::span<const double> x, std::span<double> xhat, std::span<double> inv_std,
                     std::size_t rows, std::size_t cols, double eps);

}  // namespace maven::kernels
