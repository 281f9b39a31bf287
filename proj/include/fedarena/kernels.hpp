#pragma once

// Data-parallel inner loops. Every kernel has a serial reference and an
// OpenMP version; the two produce bit-identical results because each output
// element is computed by the same sequential loop regardless of which thread
// owns it. The unsuffixed entry points pick one based on problem size and on
// whether we are already inside a parallel region (client fan-out).

#include <cstddef>
#include <span>
#include <vector>

#include "fedarena/matrix.hpp"

namespace fedarena::kernels {

// C = A * B^T   (A: n x k, B: m x k, C: n x m)
Matrix gemm_nt_serial(const Matrix& a, const Matrix& b);
Matrix gemm_nt_parallel(const Matrix& a, const Matrix& b);
Matrix gemm_nt(const Matrix& a, const Matrix& b);

// C = A^T * B   (A: k x n, B: k x m, C: n x m)
Matrix gemm_tn_serial(const Matrix& a, const Matrix& b);
Matrix gemm_tn_parallel(const Matrix& a, const Matrix& b);
Matrix gemm_tn(const Matrix& a, const Matrix& b);

// C = A * B     (A: n x k, B: k x m, C: n x m)
Matrix gemm_nn_serial(const Matrix& a, const Matrix& b);
Matrix gemm_nn_parallel(const Matrix& a, const Matrix& b);
Matrix gemm_nn(const Matrix& a, const Matrix& b);

// Column-wise reductions over a stack of client vectors (one row per client).
// Survivor sums run over ascending sorted values so the result does not
// depend on row order.

// Per column: drop `trim` smallest and `trim` largest values, average the rest.
std::vector<double> column_trimmed_mean_serial(const Matrix& rows, std::size_t trim);
std::vector<double> column_trimmed_mean_parallel(const Matrix& rows, std::size_t trim);
std::vector<double> column_trimmed_mean(const Matrix& rows, std::size_t trim);

// Per column median; even row count averages the two middle values.
std::vector<double> column_median_serial(const Matrix& rows);
std::vector<double> column_median_parallel(const Matrix& rows);
std::vector<double> column_median(const Matrix& rows);

// base + sum_i weights[i] * (rows[i] - base), evaluated as
// sum_i weights[i] * rows[i] + (1 - sum_i weights[i]) * base in row order.
std::vector<double> weighted_delta_sum_serial(std::span<const double> base, const Matrix& rows,
                                              std::span<const double> weights);
std::vector<double> weighted_delta_sum_parallel(std::span<const double> base, const Matrix& rows,
                                                std::span<const double> weights);
std::vector<double> weighted_delta_sum(std::span<const double> base, const Matrix& rows,
                                       std::span<const double> weights);

// Number of scalar multiply-adds above which the dispatchers go parallel.
inline constexpr std::size_t kParallelWorkThreshold = 1u << 16;

// Thread-count cap for all OpenMP regions; 0 restores the runtime default.
void set_max_threads(int threads);
int max_threads();

}  // namespace fedarena::kernels
