#include "fedarena/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "fedarena/errors.hpp"
#include "fedarena/rng.hpp"
#include "fedarena/training.hpp"

namespace fedarena {

void ExtractConfig::validate() const {
    relabel_pgd.validate();
    if (!(lr > 0.0)) throw std::invalid_argument("extract: lr must be > 0");
    if (epochs < 1) throw std::invalid_argument("extract: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("extract: batch_size must be >= 1");
}

void AruConfig::validate(std::size_t rounds, std::size_t n_clients) const {
    std::vector<std::string> errors;
    if (adversary_ids.empty()) errors.emplace_back("aru.adversary_ids: need at least one adversary");
    for (auto id : adversary_ids) {
        if (id >= n_clients) errors.push_back("aru.adversary_ids: id " + std::to_string(id) + " is not a client");
    }
    auto sorted = adversary_ids;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        errors.emplace_back("aru.adversary_ids: duplicate id");
    }
    if (attack_round < 1 || attack_round > rounds) {
        errors.push_back("aru.attack_round: must be within 1.." + std::to_string(rounds));
    }
    if (mode == AruMode::Extract) {
        if (extract_rounds < 1) errors.emplace_back("aru.extract_rounds: must be >= 1");
        if (attack_round < extract_rounds) {
            errors.emplace_back("aru.attack_round: extraction (" + std::to_string(extract_rounds) +
                                " rounds) cannot complete before the attack round");
        }
        try {
            extract.validate();
        } catch (const std::invalid_argument& e) {
            errors.push_back(std::string("aru.extract: ") + e.what());
        }
    } else if (checkpoint.empty()) {
        errors.emplace_back("aru.checkpoint: ReplaceKnownModel needs a checkpoint path");
    }
    if (!errors.empty()) {
        std::ostringstream os;
        for (std::size_t i = 0; i < errors.size(); ++i) os << (i ? "; " : "") << errors[i];
        throw ConfigError(os.str());
    }
}

ParamVector boost_toward(const ParamVector& global, const ParamVector& target, double factor) {
    require_same_layout(global, target);
    ParamVector out{global.layout, std::vector<double>(global.size())};
    for (std::size_t i = 0; i < global.size(); ++i) {
        out.values[i] = global.values[i] + factor * (target.values[i] - global.values[i]);
    }
    return out;
}

ParamVector craft_replacement_full(const ParamVector& global, const ParamVector& target,
                                   std::span<const ClientUpdate> benign_updates, double gamma_j) {
    require_same_layout(global, target);
    if (!(gamma_j > 0.0) || !std::isfinite(gamma_j)) {
        throw std::invalid_argument("craft_replacement_full: gamma_j must be finite and > 0 (non-zero weight)");
    }
    ParamVector out{global.layout, std::vector<double>(global.size())};
    for (std::size_t i = 0; i < global.size(); ++i) {
        out.values[i] = gamma_j * target.values[i] - (gamma_j - 1.0) * global.values[i];
    }
    for (const auto& u : benign_updates) {
        require_same_layout(global, u.params);
        if (!(u.weight > 0.0)) throw std::invalid_argument("craft_replacement_full: benign update with zero weight");
        // gamma_j / gamma_i = gamma_j * w_i
        const double scale = gamma_j * u.weight;
        for (std::size_t i = 0; i < global.size(); ++i) {
            out.values[i] -= scale * (u.params.values[i] - global.values[i]);
        }
    }
    return out;
}

std::vector<ParamVector> craft_replacement_approx(const ParamVector& global, const ParamVector& target, double gamma,
                                                  std::size_t n_adversaries) {
    if (!(gamma > 0.0)) throw std::invalid_argument("craft_replacement_approx: gamma must be > 0");
    if (n_adversaries < 1) throw std::invalid_argument("craft_replacement_approx: need at least one adversary");
    const ParamVector one = boost_toward(global, target, gamma / static_cast<double>(n_adversaries));
    return std::vector<ParamVector>(n_adversaries, one);
}

std::vector<std::size_t> relabel_incorrect(const MlpModel& model, const Batch& batch) {
    validate_batch(batch, model.input_dim(), model.class_count());
    const Matrix logits = forward(model, batch.inputs);
    std::vector<std::size_t> labels(batch.size());
    for (std::size_t r = 0; r < batch.size(); ++r) {
        const auto row = logits.row(r);
        const std::size_t pred = argmax(row);
        labels[r] = pred != batch.labels[r] ? pred : argmax_excluding(row, batch.labels[r]);
    }
    return labels;
}

MlpModel aru_extract_round(const MlpModel& extracted, const Batch& data, const ExtractConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (data.empty()) throw std::invalid_argument("aru_extract_round: empty adversary data");
    Batch perturbed{pgd_perturb(extracted, data, cfg.relabel_pgd, derive_seed(seed, {0})), {}};
    perturbed.labels = relabel_incorrect(extracted, Batch{perturbed.inputs, data.labels});
    LocalTrainConfig train{cfg.epochs, cfg.batch_size, cfg.lr, TrainMode::Standard, cfg.relabel_pgd, 0.0};
    return local_train(extracted, perturbed, train, derive_seed(seed, {1}));
}

AruCoalition::AruCoalition(AruConfig cfg, Batch pooled_data, std::optional<MlpModel> known_target, std::uint64_t seed)
    : cfg_(std::move(cfg)), pooled_(std::move(pooled_data)), target_(std::move(known_target)), seed_(seed) {
    if (cfg_.mode == AruMode::ReplaceKnownModel && !target_) {
        throw std::invalid_argument("AruCoalition: ReplaceKnownModel needs a target model");
    }
    if (cfg_.mode == AruMode::Extract && pooled_.empty()) {
        throw std::invalid_argument("AruCoalition: adversaries hold no data to extract with");
    }
}

bool AruCoalition::is_adversary(std::size_t client_id) const {
    return std::find(cfg_.adversary_ids.begin(), cfg_.adversary_ids.end(), client_id) != cfg_.adversary_ids.end();
}

bool AruCoalition::in_extraction_window(std::size_t round) const noexcept {
    return cfg_.mode == AruMode::Extract && round <= cfg_.attack_round && round + cfg_.extract_rounds > cfg_.attack_round;
}

bool AruCoalition::observe(const RoundBroadcast& b) {
    if (!in_extraction_window(b.round)) return false;
    if (b.round + cfg_.extract_rounds == cfg_.attack_round + 1) {
        target_ = unflatten(*b.global);  // extraction starts from the current global model
    }
    target_ = aru_extract_round(*target_, pooled_, cfg_.extract, derive_seed(seed_, {b.round}));
    return true;
}

std::vector<ClientUpdate> AruCoalition::craft_attack(const RoundBroadcast& b, std::span<const double> adversary_weights,
                                                     std::span<const ClientUpdate> benign_updates) const {
    if (!target_) throw std::logic_error("craft_attack: no target model (extraction has not run)");
    if (adversary_weights.size() != cfg_.adversary_ids.size()) {
        throw std::invalid_argument("craft_attack: one weight per adversary expected");
    }
    const ParamVector target = flatten(*target_);
    const auto n = static_cast<double>(cfg_.adversary_ids.size());
    std::vector<ClientUpdate> out;
    out.reserve(cfg_.adversary_ids.size());
    for (std::size_t j = 0; j < cfg_.adversary_ids.size(); ++j) {
        const double w = adversary_weights[j];
        // Each adversary carries 1/N of the replacement: gamma_j / N.
        const double gamma = 1.0 / (w * n);
        ClientUpdate u;
        u.client_id = cfg_.adversary_ids[j];
        u.weight = w;
        u.is_adversary = true;
        u.params = cfg_.knowledge == Knowledge::FullKnowledge
                       ? craft_replacement_full(*b.global, target, benign_updates, gamma)
                       : boost_toward(*b.global, target, gamma);
        out.push_back(std::move(u));
    }
    return out;
}

}  // namespace fedarena
