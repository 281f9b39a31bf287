#include "fedarena/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "fedarena/errors.hpp"
#include "fedarena/rng.hpp"

namespace fedarena {

void PgdConfig::validate() const {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw std::invalid_argument("pgd: epsilon must be finite and >= 0");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("pgd: alpha must be finite and > 0");
    if (!(low <= high)) throw std::invalid_argument("pgd: input bounds must satisfy low <= high");
}

Matrix pgd_perturb(const MlpModel& model, const Batch& batch, const PgdConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (batch.empty()) throw std::invalid_argument("pgd_attack: empty batch");
    validate_batch(batch, model.input_dim(), model.class_count());

    const auto& orig = batch.inputs.data();
    Batch work{batch.inputs, batch.labels};
    auto& x = work.inputs.data();

    if (cfg.random_start) {
        Rng rng(seed);
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] = std::clamp(orig[i] + cfg.epsilon * unit(rng), cfg.low, cfg.high);
        }
    }

    Matrix grads;
    for (std::size_t t = 0; t < cfg.iterations; ++t) {
        loss_and_input_grads(model, work, grads);
        const auto& g = grads.data();
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (!std::isfinite(g[i])) throw NumericError("pgd_attack: non-finite input gradient");
            const double step = g[i] > 0.0 ? cfg.alpha : (g[i] < 0.0 ? -cfg.alpha : 0.0);
            const double moved = std::clamp(x[i] + step, orig[i] - cfg.epsilon, orig[i] + cfg.epsilon);
            x[i] = std::clamp(moved, cfg.low, cfg.high);
        }
    }
    return std::move(work.inputs);
}

AdvBatch pgd_attack(const MlpModel& model, const Batch& batch, const PgdConfig& cfg, std::uint64_t seed) {
    AdvBatch out;
    out.perturbed_inputs = pgd_perturb(model, batch, cfg, seed);
    out.original = batch;
    return out;
}

double robust_accuracy(const MlpModel& model, const Batch& batch, const PgdConfig& cfg, std::uint64_t seed) {
    return accuracy(model, Batch{pgd_perturb(model, batch, cfg, seed), batch.labels});
}

}  // namespace fedarena
