#include "fedarena/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fedarena/rng.hpp"

namespace fedarena {

void LocalTrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("local_train: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("local_train: batch_size must be >= 1");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("local_train: lr must be > 0");
    if (!(adv_fraction >= 0.0 && adv_fraction <= 1.0)) {
        throw std::invalid_argument("local_train: adv_fraction must be in [0,1]");
    }
    if (mode != TrainMode::Standard) pgd.validate();
}

void train_step(MlpModel& model, const Batch& batch, const LocalTrainConfig& cfg, std::uint64_t pgd_seed) {
    switch (cfg.mode) {
        case TrainMode::Standard:
            sgd_step(model, loss_and_grads(model, batch).param_grads, cfg.lr);
            return;
        case TrainMode::Adversarial: {
            Batch adv{pgd_perturb(model, batch, cfg.pgd, pgd_seed), batch.labels};
            sgd_step(model, loss_and_grads(model, adv).param_grads, cfg.lr);
            return;
        }
        case TrainMode::AdversarialMix: {
            // The leading rows of an (already shuffled) mini-batch get perturbed.
            const auto n_adv = static_cast<std::size_t>(
                std::llround(cfg.adv_fraction * static_cast<double>(batch.size())));
            Batch mixed{batch.inputs, batch.labels};
            if (n_adv > 0) {
                std::vector<std::size_t> head(n_adv);
                std::iota(head.begin(), head.end(), std::size_t{0});
                const Matrix perturbed = pgd_perturb(model, gather(batch, head), cfg.pgd, pgd_seed);
                std::copy(perturbed.data().begin(), perturbed.data().end(), mixed.inputs.data().begin());
            }
            sgd_step(model, loss_and_grads(model, mixed).param_grads, cfg.lr);
            return;
        }
    }
}

MlpModel local_train(const MlpModel& model, const Batch& data, const LocalTrainConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (data.empty()) throw std::invalid_argument("local_train: empty client data");
    validate_batch(data, model.input_dim(), model.class_count());

    MlpModel local = model;
    Rng shuffle_rng(seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        std::size_t step = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++step) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            const Batch mb = gather(data, std::span(order).subspan(start, stop - start));
            train_step(local, mb, cfg, derive_seed(seed, {epoch, step}));
        }
    }
    return local;
}

EvalResult evaluate(const MlpModel& model, const Batch& test, const PgdConfig& eval_pgd, std::uint64_t seed) {
    if (test.empty()) throw std::invalid_argument("evaluate: empty test data");
    return {accuracy(model, test), robust_accuracy(model, test, eval_pgd, seed)};
}

}  // namespace fedarena
