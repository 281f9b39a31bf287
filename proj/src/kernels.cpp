#include "fedarena/kernels.hpp"

#include <algorithm>
#include <string>

#include <omp.h>

#include "fedarena/errors.hpp"

namespace fedarena::kernels {
namespace {

int g_max_threads = 0;

bool go_parallel(std::size_t work) {
    return work >= kParallelWorkThreshold && !omp_in_parallel() && max_threads() > 1;
}

void require(bool ok, const char* what, const Matrix& a, const Matrix& b) {
    if (!ok) {
        throw ShapeError(std::string(what) + ": incompatible shapes " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
    }
}

inline void gemm_nt_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
    const auto ar = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
        const auto br = b.row(j);
        double acc = 0.0;
        for (std::size_t k = 0; k < ar.size(); ++k) acc += ar[k] * br[k];
        c(i, j) = acc;
    }
}

inline void gemm_tn_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
    auto cr = c.row(i);
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const double aki = a(k, i);
        if (aki == 0.0) continue;
        const auto br = b.row(k);
        for (std::size_t j = 0; j < cr.size(); ++j) cr[j] += aki * br[j];
    }
}

inline void gemm_nn_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
    auto cr = c.row(i);
    const auto ar = a.row(i);
    for (std::size_t k = 0; k < ar.size(); ++k) {
        const double aik = ar[k];
        if (aik == 0.0) continue;
        const auto br = b.row(k);
        for (std::size_t j = 0; j < cr.size(); ++j) cr[j] += aik * br[j];
    }
}

// `scratch` must hold rows.rows() doubles.
inline void gather_sorted_column(const Matrix& rows, std::size_t col, std::vector<double>& scratch) {
    for (std::size_t r = 0; r < rows.rows(); ++r) scratch[r] = rows(r, col);
    std::sort(scratch.begin(), scratch.end());
}

inline double trimmed_mean_of_sorted(const std::vector<double>& sorted, std::size_t trim) {
    double acc = 0.0;
    const std::size_t stop = sorted.size() - trim;
    for (std::size_t r = trim; r < stop; ++r) acc += sorted[r];
    return acc / static_cast<double>(stop - trim);
}

inline double median_of_sorted(const std::vector<double>& sorted) {
    const std::size_t m = sorted.size();
    if (m % 2 == 1) return sorted[m / 2];
    return (sorted[m / 2 - 1] + sorted[m / 2]) / 2.0;
}

void check_trim(const Matrix& rows, std::size_t trim) {
    if (rows.rows() == 0 || rows.rows() < 2 * trim + 1) {
        throw std::invalid_argument("column_trimmed_mean: need at least 2*trim+1 rows");
    }
}

void check_delta_args(std::span<const double> base, const Matrix& rows, std::span<const double> weights) {
    if (rows.cols() != base.size() || rows.rows() != weights.size()) {
        throw ShapeError("weighted_delta_sum: base/rows/weights sizes disagree");
    }
}

// Weight left on the base when the weights do not sum to exactly one.
inline double residual_weight(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    return 1.0 - total;
}

// sum_i w_i * rows[i] + (1 - sum_i w_i) * base, which equals
// base + sum_i w_i * (rows[i] - base) but reproduces a lone weight-1 row exactly.
inline double weighted_delta_at(std::span<const double> base, const Matrix& rows,
                                std::span<const double> weights, double residual, std::size_t col) {
    double acc = 0.0;
    for (std::size_t r = 0; r < rows.rows(); ++r) acc += weights[r] * rows(r, col);
    return residual == 0.0 ? acc : acc + residual * base[col];
}

}  // namespace

void set_max_threads(int threads) {
    g_max_threads = threads > 0 ? threads : 0;
    omp_set_num_threads(threads > 0 ? threads : omp_get_num_procs());
}

int max_threads() { return g_max_threads > 0 ? g_max_threads : omp_get_max_threads(); }

Matrix gemm_nt_serial(const Matrix& a, const Matrix& b) {
    require(a.cols() == b.cols(), "gemm_nt", a, b);
    Matrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) gemm_nt_row(a, b, c, i);
    return c;
}

Matrix gemm_nt_parallel(const Matrix& a, const Matrix& b) {
    require(a.cols() == b.cols(), "gemm_nt", a, b);
    Matrix c(a.rows(), b.rows());
    const auto n = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) gemm_nt_row(a, b, c, static_cast<std::size_t>(i));
    return c;
}

Matrix gemm_nt(const Matrix& a, const Matrix& b) {
    return go_parallel(a.rows() * a.cols() * b.rows()) ? gemm_nt_parallel(a, b) : gemm_nt_serial(a, b);
}

Matrix gemm_tn_serial(const Matrix& a, const Matrix& b) {
    require(a.rows() == b.rows(), "gemm_tn", a, b);
    Matrix c(a.cols(), b.cols());
    for (std::size_t i = 0; i < a.cols(); ++i) gemm_tn_row(a, b, c, i);
    return c;
}

Matrix gemm_tn_parallel(const Matrix& a, const Matrix& b) {
    require(a.rows() == b.rows(), "gemm_tn", a, b);
    Matrix c(a.cols(), b.cols());
    const auto n = static_cast<std::ptrdiff_t>(a.cols());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) gemm_tn_row(a, b, c, static_cast<std::size_t>(i));
    return c;
}

Matrix gemm_tn(const Matrix& a, const Matrix& b) {
    return go_parallel(a.rows() * a.cols() * b.cols()) ? gemm_tn_parallel(a, b) : gemm_tn_serial(a, b);
}

Matrix gemm_nn_serial(const Matrix& a, const Matrix& b) {
    require(a.cols() == b.rows(), "gemm_nn", a, b);
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) gemm_nn_row(a, b, c, i);
    return c;
}

Matrix gemm_nn_parallel(const Matrix& a, const Matrix& b) {
    require(a.cols() == b.rows(), "gemm_nn", a, b);
    Matrix c(a.rows(), b.cols());
    const auto n = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) gemm_nn_row(a, b, c, static_cast<std::size_t>(i));
    return c;
}

Matrix gemm_nn(const Matrix& a, const Matrix& b) {
    return go_parallel(a.rows() * a.cols() * b.cols()) ? gemm_nn_parallel(a, b) : gemm_nn_serial(a, b);
}

std::vector<double> column_trimmed_mean_serial(const Matrix& rows, std::size_t trim) {
    check_trim(rows, trim);
    std::vector<double> out(rows.cols());
    std::vector<double> scratch(rows.rows());
    for (std::size_t c = 0; c < rows.cols(); ++c) {
        gather_sorted_column(rows, c, scratch);
        out[c] = trimmed_mean_of_sorted(scratch, trim);
    }
    return out;
}

std::vector<double> column_trimmed_mean_parallel(const Matrix& rows, std::size_t trim) {
    check_trim(rows, trim);
    std::vector<double> out(rows.cols());
    const auto cols = static_cast<std::ptrdiff_t>(rows.cols());
#pragma omp parallel
    {
        std::vector<double> scratch(rows.rows());
#pragma omp for schedule(static)
        for (std::ptrdiff_t c = 0; c < cols; ++c) {
            gather_sorted_column(rows, static_cast<std::size_t>(c), scratch);
            out[static_cast<std::size_t>(c)] = trimmed_mean_of_sorted(scratch, trim);
        }
    }
    return out;
}

std::vector<double> column_trimmed_mean(const Matrix& rows, std::size_t trim) {
    return go_parallel(rows.size() * 8) ? column_trimmed_mean_parallel(rows, trim)
                                        : column_trimmed_mean_serial(rows, trim);
}

std::vector<double> column_median_serial(const Matrix& rows) {
    if (rows.rows() == 0) throw std::invalid_argument("column_median: no rows");
    std::vector<double> out(rows.cols());
    std::vector<double> scratch(rows.rows());
    for (std::size_t c = 0; c < rows.cols(); ++c) {
        gather_sorted_column(rows, c, scratch);
        out[c] = median_of_sorted(scratch);
    }
    return out;
}

std::vector<double> column_median_parallel(const Matrix& rows) {
    if (rows.rows() == 0) throw std::invalid_argument("column_median: no rows");
    std::vector<double> out(rows.cols());
    const auto cols = static_cast<std::ptrdiff_t>(rows.cols());
#pragma omp parallel
    {
        std::vector<double> scratch(rows.rows());
#pragma omp for schedule(static)
        for (std::ptrdiff_t c = 0; c < cols; ++c) {
            gather_sorted_column(rows, static_cast<std::size_t>(c), scratch);
            out[static_cast<std::size_t>(c)] = median_of_sorted(scratch);
        }
    }
    return out;
}

std::vector<double> column_median(const Matrix& rows) {
    return go_parallel(rows.size() * 8) ? column_median_parallel(rows) : column_median_serial(rows);
}

std::vector<double> weighted_delta_sum_serial(std::span<const double> base, const Matrix& rows,
                                              std::span<const double> weights) {
    check_delta_args(base, rows, weights);
    std::vector<double> out(base.size());
    const double residual = residual_weight(weights);
    for (std::size_t c = 0; c < base.size(); ++c) out[c] = weighted_delta_at(base, rows, weights, residual, c);
    return out;
}

std::vector<double> weighted_delta_sum_parallel(std::span<const double> base, const Matrix& rows,
                                                std::span<const double> weights) {
    check_delta_args(base, rows, weights);
    std::vector<double> out(base.size());
    const double residual = residual_weight(weights);
    const auto cols = static_cast<std::ptrdiff_t>(base.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t c = 0; c < cols; ++c) {
        out[static_cast<std::size_t>(c)] =
            weighted_delta_at(base, rows, weights, residual, static_cast<std::size_t>(c));
    }
    return out;
}

std::vector<double> weighted_delta_sum(std::span<const double> base, const Matrix& rows,
                                       std::span<const double> weights) {
    return go_parallel(rows.size()) ? weighted_delta_sum_parallel(base, rows, weights)
                                    : weighted_delta_sum_serial(base, rows, weights);
}

}  // namespace fedarena::kernels
