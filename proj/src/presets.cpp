#include <algorithm>
#include <stdexcept>

#include "fedarena/harness.hpp"

namespace fedarena {
namespace {

// Shared desk-scale setup: 10 blob classes in 32 dims, 40 non-iid clients.
ExperimentConfig desk_base() {
    ExperimentConfig cfg;
    cfg.seed = 7;
    cfg.dataset = DatasetConfig{};
    cfg.dataset.class_count = 10;
    cfg.dataset.dim = 32;
    cfg.dataset.per_class = 300;
    cfg.dataset.spread = 0.1;
    cfg.concentration = 0.4;
    cfg.test_fraction = 0.2;
    cfg.n_clients = 40;
    cfg.rounds = 100;
    cfg.hidden = {64};
    cfg.local.epochs = 2;
    cfg.local.batch_size = 16;
    cfg.local.lr = 0.1;
    cfg.local.mode = TrainMode::Standard;
    cfg.eval_pgd = PgdConfig{0.1, 0.025, 10, true};
    cfg.local.pgd = cfg.eval_pgd;
    cfg.local.adv_fraction = 0.5;
    cfg.eval_every = 10;
    return cfg;
}

ExperimentConfig fat_base() {
    ExperimentConfig cfg = desk_base();
    cfg.local.mode = TrainMode::AdversarialMix;
    return cfg;
}

AruConfig desk_aru(const ExperimentConfig& cfg, AruMode mode) {
    AruConfig aru;
    for (std::size_t i = 0; i < 5; ++i) aru.adversary_ids.push_back(i);
    aru.mode = mode;
    aru.attack_round = cfg.rounds;
    aru.knowledge = Knowledge::NearConvergence;
    aru.extract_rounds = 20;
    aru.extract.relabel_pgd = cfg.eval_pgd;
    aru.extract.lr = 0.001;
    aru.extract.epochs = 1;
    aru.extract.batch_size = 16;
    return aru;
}

}  // namespace

std::vector<std::string> preset_names() {
    return {"fedavg", "fat", "aru-known", "aru-extract", "aru-extract-median", "aru-extract-trimmed"};
}

ExperimentConfig preset_config(const std::string& name) {
    if (name == "fedavg") return desk_base();
    if (name == "fat") return fat_base();
    ExperimentConfig cfg = fat_base();
    if (name == "aru-known") {
        cfg.aru = desk_aru(cfg, AruMode::ReplaceKnownModel);
        return cfg;
    }
    if (name.rfind("aru-extract", 0) == 0) {
        cfg.aru = desk_aru(cfg, AruMode::Extract);
        if (name == "aru-extract") return cfg;
        if (name == "aru-extract-median") {
            cfg.defense = AggregationRule::median();
            return cfg;
        }
        if (name == "aru-extract-trimmed") {
            cfg.defense = AggregationRule::trimmed_mean(0.15);
            return cfg;
        }
    }
    throw std::invalid_argument("unknown preset '" + name + "'");
}

RunResult run_preset(const std::string& name, const std::filesystem::path& out_dir,
                     const std::optional<std::uint64_t>& seed, int threads) {
    ExperimentConfig cfg = preset_config(name);
    if (seed) cfg.seed = *seed;
    cfg.threads = threads;
    if (cfg.aru && cfg.aru->mode == AruMode::ReplaceKnownModel) {
        ExperimentConfig reference = preset_config("fedavg");
        reference.seed = cfg.seed;
        reference.threads = threads;
        const auto ref_dir = out_dir / "reference";
        write_run_outputs(reference, run_experiment(reference), ref_dir);
        cfg.aru->checkpoint = std::filesystem::absolute(ref_dir / "final_model.ckpt");
    }
    RunResult result = run_experiment(cfg);
    write_run_outputs(cfg, result, out_dir);
    return result;
}

}  // namespace fedarena
