#pragma once

#include <cstddef>
#include <cstdint>

namespace fedarena {

// Randomized exactness check of the model-replacement algebra: FedAvg after
// craft_replacement_full must land on the target, and the split boosted
// updates must land on it when benign clients did not move.
struct ExactnessReport {
    std::size_t cases = 0;
    double max_full_error = 0.0;    // relative to max |R|
    double max_approx_error = 0.0;  // benign updates pinned at G
    bool passed = false;
};

ExactnessReport replacement_exactness_suite(std::size_t cases, std::uint64_t seed, double full_tol = 1e-9,
                                            double approx_tol = 1e-12);

// max_i |a_i - b_i| / max(max_i |b_i|, 1e-300)
double max_relative_error(const double* a, const double* b, std::size_t n);

}  // namespace fedarena
