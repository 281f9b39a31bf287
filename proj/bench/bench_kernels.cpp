// Serial reference vs OpenMP kernels. Also checks the two agree bit-for-bit.
//
//   bench_kernels [threads]

#include <chrono>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <random>
#include <stdexcept>

#include <omp.h>

#include "fedarena/kernels.hpp"

namespace {

using fedarena::Matrix;
namespace k = fedarena::kernels;

Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    Matrix m(rows, cols);
    for (double& v : m.data()) v = d(rng);
    return m;
}

template <typename Fn>
double best_ms(Fn&& fn, int reps = 5) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        best = std::min(best, ms);
    }
    return best;
}

template <typename Serial, typename Parallel>
void compare(const std::string& name, Serial&& serial, Parallel&& parallel) {
    const auto a = serial();
    const auto b = parallel();
    if (a != b) throw std::runtime_error(name + ": serial and parallel results differ");
    const double ts = best_ms(serial);
    const double tp = best_ms(parallel);
    std::cout << std::left << std::setw(34) << name << std::right << std::fixed << std::setprecision(3)
              << std::setw(10) << ts << " ms" << std::setw(10) << tp << " ms" << std::setw(8) << std::setprecision(2)
              << ts / tp << "x\n";
}

}  // namespace

int main(int argc, char** argv) {
    const int threads = argc > 1 ? std::atoi(argv[1]) : omp_get_num_procs();
    k::set_max_threads(threads);
    std::cout << "threads = " << k::max_threads() << "\n";
    std::cout << std::left << std::setw(34) << "kernel" << std::right << std::setw(13) << "serial" << std::setw(13)
              << "parallel" << std::setw(8) << "speedup" << "\n";

    std::mt19937_64 rng(42);
    for (std::size_t n : {64, 256, 512}) {
        const Matrix a = random_matrix(n, n, rng);
        const Matrix b = random_matrix(n, n, rng);
        const std::string tag = std::to_string(n) + "x" + std::to_string(n);
        compare("gemm_nt " + tag, [&] { return k::gemm_nt_serial(a, b); }, [&] { return k::gemm_nt_parallel(a, b); });
        compare("gemm_tn " + tag, [&] { return k::gemm_tn_serial(a, b); }, [&] { return k::gemm_tn_parallel(a, b); });
        compare("gemm_nn " + tag, [&] { return k::gemm_nn_serial(a, b); }, [&] { return k::gemm_nn_parallel(a, b); });
    }
    for (std::size_t dim : {10'000, 100'000}) {
        const Matrix rows = random_matrix(40, dim, rng);
        std::vector<double> base(dim, 0.0);
        std::vector<double> weights(40, 1.0 / 40.0);
        const std::string tag = "40 x " + std::to_string(dim);
        compare("trimmed_mean " + tag, [&] { return k::column_trimmed_mean_serial(rows, 6); },
                [&] { return k::column_trimmed_mean_parallel(rows, 6); });
        compare("median " + tag, [&] { return k::column_median_serial(rows); },
                [&] { return k::column_median_parallel(rows); });
        compare("weighted_delta_sum " + tag, [&] { return k::weighted_delta_sum_serial(base, rows, weights); },
                [&] { return k::weighted_delta_sum_parallel(base, rows, weights); });
    }
    return 0;
}
