#pragma once

#include <cstddef>
#include <cstdint>

#include "fedarena/attacks.hpp"
#include "fedarena/model.hpp"

namespace fedarena {

enum class TrainMode { Standard, Adversarial, AdversarialMix };

struct LocalTrainConfig {
    std::size_t epochs = 1;
    std::size_t batch_size = 32;
    double lr = 0.1;
    TrainMode mode = TrainMode::Standard;
    PgdConfig pgd{};           // used by the adversarial modes
    double adv_fraction = 0.5;  // AdversarialMix only

    void validate() const;
};

// One SGD step on `batch`. In the adversarial modes the perturbed part of the
// batch is crafted against `model` as it is before the step.
void train_step(MlpModel& model, const Batch& batch, const LocalTrainConfig& cfg, std::uint64_t pgd_seed);

// Mini-batch SGD over `data` for cfg.epochs epochs, reshuffling each epoch.
// Returns the client's updated model.
MlpModel local_train(const MlpModel& model, const Batch& data, const LocalTrainConfig& cfg, std::uint64_t seed);

struct EvalResult {
    double test_acc = 0.0;
    double adv_acc = 0.0;
};

EvalResult evaluate(const MlpModel& model, const Batch& test, const PgdConfig& eval_pgd, std::uint64_t seed);

}  // namespace fedarena
