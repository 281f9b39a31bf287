#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedarena/matrix.hpp"
#include "fedarena/model.hpp"

namespace fedarena {

/// One client's upload for a round.
struct ClientUpdate {
    std::size_t client_id = 0;
    ParamVector params;    // U_i^{t+1}
    double weight = 0.0;   // 1/gamma_i
    // Ground truth for diagnostics. Aggregation rules never read it.
    bool is_adversary = false;
};

enum class RuleKind { FedAvg, TrimmedMean, Median };

struct AggregationRule {
    RuleKind kind = RuleKind::FedAvg;
    double beta = 0.15;  // TrimmedMean only, in [0, 0.5)

    static AggregationRule fedavg() { return {RuleKind::FedAvg, 0.0}; }
    static AggregationRule trimmed_mean(double beta) { return {RuleKind::TrimmedMean, beta}; }
    static AggregationRule median() { return {RuleKind::Median, 0.0}; }

    void validate() const;
    // "fedavg", "trimmed:<beta>", "median"
    std::string to_string() const;
    static AggregationRule parse(const std::string& text);
};

struct InclusionStats {
    AggregationRule rule;
    double adversary_inclusion = 0.0;
    double benign_inclusion = 0.0;
};

// k = floor(beta * m).
std::size_t trim_count(double beta, std::size_t m);

// G + sum_i w_i (U_i - G). Weights must sum to 1 within 1e-9.
ParamVector fedavg(const ParamVector& global, std::span<const ClientUpdate> updates);

// Per coordinate: sort, drop floor(beta*m) at each end, unweighted mean of the rest.
ParamVector trimmed_mean(std::span<const ClientUpdate> updates, double beta);

// Per coordinate median; even m averages the two middle values.
ParamVector coord_median(std::span<const ClientUpdate> updates);

ParamVector aggregate(const ParamVector& global, std::span<const ClientUpdate> updates, const AggregationRule& rule);

// How much of the adversaries' uploads survive a robust rule.
// TrimmedMean: per client, the fraction of coordinates whose value lies inside
// the kept band [sorted[k], sorted[m-1-k]], averaged over that group's clients.
// Median: the fraction of coordinates whose selected middle value(s) equal a
// value uploaded by some client of the group.
// Survival is value-based, so tied values survive together.
InclusionStats inclusion_stats(const ParamVector& global, std::span<const ClientUpdate> updates,
                               const AggregationRule& rule);

// Weights n_i / sum_j n_j.
std::vector<double> sample_count_weights(std::span<const std::size_t> counts);

// Stack of update vectors, one row per client. LayoutError on mismatch.
Matrix stack_updates(std::span<const ClientUpdate> updates);

}  // namespace fedarena
