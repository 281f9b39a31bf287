#include "fedarena/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "fedarena/errors.hpp"
#include "fedarena/kernels.hpp"

namespace fedarena {
namespace {

void require_nonempty(std::span<const ClientUpdate> updates, const char* what) {
    if (updates.empty()) throw std::invalid_argument(std::string(what) + ": no client updates");
}

}  // namespace

void AggregationRule::validate() const {
    if (kind == RuleKind::TrimmedMean && !(beta >= 0.0 && beta < 0.5)) {
        throw std::invalid_argument("trimmed mean: beta must be in [0, 0.5)");
    }
}

std::string AggregationRule::to_string() const {
    switch (kind) {
        case RuleKind::FedAvg: return "fedavg";
        case RuleKind::Median: return "median";
        case RuleKind::TrimmedMean: {
            std::ostringstream os;
            os << "trimmed:" << beta;
            return os.str();
        }
    }
    return "?";
}

AggregationRule AggregationRule::parse(const std::string& text) {
    if (text == "fedavg") return fedavg();
    if (text == "median") return median();
    if (text == "trimmed") return trimmed_mean(0.15);
    if (text.rfind("trimmed:", 0) == 0) {
        std::size_t used = 0;
        const std::string tail = text.substr(8);
        double beta = 0.0;
        try {
            beta = std::stod(tail, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != tail.size()) throw std::invalid_argument("bad trimmed-mean beta in '" + text + "'");
        auto rule = trimmed_mean(beta);
        rule.validate();
        return rule;
    }
    throw std::invalid_argument("unknown aggregation rule '" + text + "' (fedavg, trimmed:<beta>, median)");
}

std::size_t trim_count(double beta, std::size_t m) {
    return static_cast<std::size_t>(std::floor(beta * static_cast<double>(m)));
}

Matrix stack_updates(std::span<const ClientUpdate> updates) {
    require_nonempty(updates, "aggregate");
    const auto& first = updates.front().params;
    Matrix rows(updates.size(), first.size());
    for (std::size_t i = 0; i < updates.size(); ++i) {
        require_same_layout(first, updates[i].params);
        std::copy(updates[i].params.values.begin(), updates[i].params.values.end(), rows.row(i).begin());
    }
    return rows;
}

ParamVector fedavg(const ParamVector& global, std::span<const ClientUpdate> updates) {
    require_nonempty(updates, "fedavg");
    std::vector<double> weights;
    weights.reserve(updates.size());
    double total = 0.0;
    for (const auto& u : updates) {
        require_same_layout(global, u.params);
        weights.push_back(u.weight);
        total += u.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw std::invalid_argument("fedavg: client weights sum to " + std::to_string(total) + ", expected 1");
    }
    return {global.layout, kernels::weighted_delta_sum(global.values, stack_updates(updates), weights)};
}

ParamVector trimmed_mean(std::span<const ClientUpdate> updates, double beta) {
    require_nonempty(updates, "trimmed_mean");
    AggregationRule::trimmed_mean(beta).validate();
    const std::size_t m = updates.size();
    const std::size_t k = trim_count(beta, m);
    if (m < 2 * k + 1) throw std::invalid_argument("trimmed_mean: nothing survives trimming");
    return {updates.front().params.layout, kernels::column_trimmed_mean(stack_updates(updates), k)};
}

ParamVector coord_median(std::span<const ClientUpdate> updates) {
    require_nonempty(updates, "coord_median");
    return {updates.front().params.layout, kernels::column_median(stack_updates(updates))};
}

ParamVector aggregate(const ParamVector& global, std::span<const ClientUpdate> updates, const AggregationRule& rule) {
    switch (rule.kind) {
        case RuleKind::FedAvg: return fedavg(global, updates);
        case RuleKind::TrimmedMean: return trimmed_mean(updates, rule.beta);
        case RuleKind::Median: return coord_median(updates);
    }
    throw std::logic_error("aggregate: unknown rule");
}

InclusionStats inclusion_stats(const ParamVector& global, std::span<const ClientUpdate> updates,
                               const AggregationRule& rule) {
    require_nonempty(updates, "inclusion_stats");
    if (rule.kind == RuleKind::FedAvg) throw std::invalid_argument("inclusion_stats: needs a robust rule");
    rule.validate();
    std::size_t n_adv = 0;
    for (const auto& u : updates) {
        require_same_layout(global, u.params);
        n_adv += u.is_adversary;
    }
    if (n_adv == 0) throw std::invalid_argument("inclusion_stats: no adversary-tagged updates");
    const std::size_t n_benign = updates.size() - n_adv;

    const Matrix rows = stack_updates(updates);
    const std::size_t m = rows.rows();
    const std::size_t dim = rows.cols();
    const std::size_t k = rule.kind == RuleKind::TrimmedMean ? trim_count(rule.beta, m) : 0;
    if (rule.kind == RuleKind::TrimmedMean && m < 2 * k + 1) {
        throw std::invalid_argument("inclusion_stats: nothing survives trimming");
    }

    // Per client: number of coordinates kept (trimmed mean). Per group:
    // number of coordinates whose median it supplied.
    std::vector<std::size_t> kept(m, 0);
    std::size_t adv_median_hits = 0;
    std::size_t benign_median_hits = 0;
    std::vector<double> sorted(m);
    for (std::size_t c = 0; c < dim; ++c) {
        for (std::size_t r = 0; r < m; ++r) sorted[r] = rows(r, c);
        std::sort(sorted.begin(), sorted.end());
        if (rule.kind == RuleKind::TrimmedMean) {
            const double lo = sorted[k];
            const double hi = sorted[m - 1 - k];
            for (std::size_t r = 0; r < m; ++r) {
                const double v = rows(r, c);
                kept[r] += (v >= lo && v <= hi);
            }
        } else {
            const double a = sorted[(m - 1) / 2];
            const double b = sorted[m / 2];
            bool adv_hit = false;
            bool benign_hit = false;
            for (std::size_t r = 0; r < m; ++r) {
                const double v = rows(r, c);
                if (v == a || v == b) (updates[r].is_adversary ? adv_hit : benign_hit) = true;
            }
            adv_median_hits += adv_hit;
            benign_median_hits += benign_hit;
        }
    }

    InclusionStats stats{rule, 0.0, 0.0};
    const double d = static_cast<double>(dim);
    if (rule.kind == RuleKind::TrimmedMean) {
        double adv_sum = 0.0;
        double benign_sum = 0.0;
        for (std::size_t r = 0; r < m; ++r) {
            (updates[r].is_adversary ? adv_sum : benign_sum) += static_cast<double>(kept[r]) / d;
        }
        stats.adversary_inclusion = adv_sum / static_cast<double>(n_adv);
        stats.benign_inclusion = n_benign ? benign_sum / static_cast<double>(n_benign) : 0.0;
    } else {
        stats.adversary_inclusion = static_cast<double>(adv_median_hits) / d;
        stats.benign_inclusion = n_benign ? static_cast<double>(benign_median_hits) / d : 0.0;
    }
    return stats;
}

std::vector<double> sample_count_weights(std::span<const std::size_t> counts) {
    double total = 0.0;
    for (auto c : counts) total += static_cast<double>(c);
    if (!(total > 0.0)) throw std::invalid_argument("sample_count_weights: no samples");
    std::vector<double> w;
    w.reserve(counts.size());
    for (auto c : counts) w.push_back(static_cast<double>(c) / total);
    return w;
}

}  // namespace fedarena
