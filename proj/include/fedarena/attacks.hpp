#pragma once

#include <cstddef>
#include <cstdint>

#include "fedarena/model.hpp"

namespace fedarena {

/// White-box untargeted L-infinity PGD.
struct PgdConfig {
    double epsilon = 0.1;       // radius of the L-inf ball
    double alpha = 0.025;       // step size
    std::size_t iterations = 10;
    bool random_start = true;
    double low = 0.0;           // input bounds
    double high = 1.0;

    // std::invalid_argument on negative/non-finite values or low > high.
    void validate() const;
    friend bool operator==(const PgdConfig&, const PgdConfig&) = default;
};

struct AdvBatch {
    Batch original;
    Matrix perturbed_inputs;

    const std::vector<std::size_t>& labels() const noexcept { return original.labels; }
    Batch perturbed() const { return {perturbed_inputs, original.labels}; }
};

// x_{t+1} = clip_{x+S}(x_t + alpha * sign(grad_x L(x_t, y))), clamped to [low, high].
// The random start draws u ~ U[-1,1]^d and starts at x + epsilon*u, so starts for
// different budgets under one seed are the same direction scaled to the ball.
Matrix pgd_perturb(const MlpModel& model, const Batch& batch, const PgdConfig& cfg, std::uint64_t seed);
AdvBatch pgd_attack(const MlpModel& model, const Batch& batch, const PgdConfig& cfg, std::uint64_t seed);

// Fraction of examples still classified correctly after pgd_attack.
double robust_accuracy(const MlpModel& model, const Batch& batch, const PgdConfig& cfg, std::uint64_t seed);

}  // namespace fedarena
