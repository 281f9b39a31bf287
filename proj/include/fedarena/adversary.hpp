#pragma once

// Adversarial Robustness Unhardening: model replacement toward a non-robust
// target, and extraction of that target from the robust global model.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "fedarena/aggregation.hpp"
#include "fedarena/attacks.hpp"
#include "fedarena/model.hpp"

namespace fedarena {

enum class AruMode { ReplaceKnownModel, Extract };
enum class Knowledge { FullKnowledge, NearConvergence };

struct ExtractConfig {
    PgdConfig relabel_pgd{0.1, 0.025, 10, true};
    double lr = 0.05;
    std::size_t epochs = 1;
    std::size_t batch_size = 32;

    void validate() const;
};

struct AruConfig {
    std::vector<std::size_t> adversary_ids;
    AruMode mode = AruMode::Extract;
    std::filesystem::path checkpoint;  // ReplaceKnownModel target R
    std::size_t extract_rounds = 50;
    ExtractConfig extract{};
    std::size_t attack_round = 200;    // 1-based round whose aggregation is replaced
    Knowledge knowledge = Knowledge::NearConvergence;

    // ConfigError listing every violated constraint.
    void validate(std::size_t rounds, std::size_t n_clients) const;
};

// G + factor * (R - G).
ParamVector boost_toward(const ParamVector& global, const ParamVector& target, double factor);

// U_j = gamma_j R - (gamma_j - 1) G - sum_i (gamma_j / gamma_i)(U_i - G), with
// 1/gamma_i = benign[i].weight. FedAvg over benign + {U_j} then yields R.
ParamVector craft_replacement_full(const ParamVector& global, const ParamVector& target,
                                   std::span<const ClientUpdate> benign_updates, double gamma_j);

// Near-convergence form with the boost split over n adversaries: each submits
// G + (gamma / n)(R - G).
std::vector<ParamVector> craft_replacement_approx(const ParamVector& global, const ParamVector& target, double gamma,
                                                  std::size_t n_adversaries);

// Relabel each example with the model's prediction on it; when that prediction
// is the true label, use the runner-up class instead.
std::vector<std::size_t> relabel_incorrect(const MlpModel& model, const Batch& batch);

// One extraction round: PGD-perturb `data` against `extracted`, relabel the
// perturbed points with wrong labels, then run standard SGD on them.
MlpModel aru_extract_round(const MlpModel& extracted, const Batch& data, const ExtractConfig& cfg, std::uint64_t seed);

/// What every client, adversarial or not, receives from the server.
struct RoundBroadcast {
    std::size_t round = 0;  // 1-based round about to be trained
    const ParamVector* global = nullptr;
};

/// State shared by the colluding ARU clients. The coalition only ever sees
/// round broadcasts and its own pooled data; benign uploads reach it solely
/// through craft_attack in FullKnowledge mode.
class AruCoalition {
public:
    AruCoalition(AruConfig cfg, Batch pooled_data, std::optional<MlpModel> known_target, std::uint64_t seed);

    const AruConfig& config() const noexcept { return cfg_; }
    bool is_adversary(std::size_t client_id) const;
    bool is_attack_round(std::size_t round) const noexcept { return round == cfg_.attack_round; }
    bool in_extraction_window(std::size_t round) const noexcept;

    // Advance the extracted model if `b.round` falls inside the extraction window.
    // Returns true when an extraction step ran.
    bool observe(const RoundBroadcast& b);

    // Uploads for every adversary at the attack round, in adversary_ids order.
    // `adversary_weights[j]` is the aggregation weight of adversary_ids[j].
    // `benign_updates` is consulted only with Knowledge::FullKnowledge.
    std::vector<ClientUpdate> craft_attack(const RoundBroadcast& b, std::span<const double> adversary_weights,
                                           std::span<const ClientUpdate> benign_updates) const;

    // Target model R: the checkpoint, or the extracted model.
    const std::optional<MlpModel>& target() const noexcept { return target_; }

private:
    AruConfig cfg_;
    Batch pooled_;
    std::optional<MlpModel> target_;
    std::uint64_t seed_;
};

}  // namespace fedarena
