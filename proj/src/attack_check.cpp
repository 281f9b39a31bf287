#include "fedarena/attack_check.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fedarena/adversary.hpp"
#include "fedarena/aggregation.hpp"
#include "fedarena/rng.hpp"

namespace fedarena {

double max_relative_error(const double* a, const double* b, std::size_t n) {
    double diff = 0.0;
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        diff = std::max(diff, std::abs(a[i] - b[i]));
        scale = std::max(scale, std::abs(b[i]));
    }
    return diff / std::max(scale, 1e-300);
}

ExactnessReport replacement_exactness_suite(std::size_t cases, std::uint64_t seed, double full_tol,
                                            double approx_tol) {
    ExactnessReport report;
    report.cases = cases;
    for (std::size_t c = 0; c < cases; ++c) {
        Rng rng(derive_seed(seed, {c}));
        std::uniform_int_distribution<std::size_t> dim_dist(1, 200);
        std::uniform_int_distribution<std::size_t> m_dist(2, 10);
        std::uniform_real_distribution<double> val(-1.0, 1.0);
        std::uniform_real_distribution<double> raw_weight(0.1, 1.0);
        const std::size_t dim = dim_dist(rng);
        const std::size_t m = m_dist(rng);

        const Layout layout{{0, ParamKind::Bias, dim, 1}};
        ParamVector global{layout, std::vector<double>(dim)};
        ParamVector target{layout, std::vector<double>(dim)};
        for (auto& v : global.values) v = val(rng);
        for (auto& v : target.values) v = val(rng);

        std::vector<double> w(m);
        double total = 0.0;
        for (auto& x : w) total += x = raw_weight(rng);
        for (auto& x : w) x /= total;

        // Client m-1 is the adversary.
        std::vector<ClientUpdate> benign, pinned;
        for (std::size_t i = 0; i + 1 < m; ++i) {
            ClientUpdate u{i, {layout, std::vector<double>(dim)}, w[i], false};
            for (std::size_t k = 0; k < dim; ++k) u.params.values[k] = global.values[k] + 0.1 * val(rng);
            benign.push_back(u);
            pinned.push_back({i, global, w[i], false});
        }
        const double gamma_j = 1.0 / w[m - 1];

        auto full = benign;
        full.push_back({m - 1, craft_replacement_full(global, target, benign, gamma_j), w[m - 1], true});
        const ParamVector after_full = fedavg(global, full);
        report.max_full_error = std::max(report.max_full_error,
                                         max_relative_error(after_full.values.data(), target.values.data(), dim));

        auto approx = pinned;
        approx.push_back({m - 1, craft_replacement_approx(global, target, gamma_j, 1).front(), w[m - 1], true});
        const ParamVector after_approx = fedavg(global, approx);
        report.max_approx_error = std::max(
            report.max_approx_error, max_relative_error(after_approx.values.data(), target.values.data(), dim));
    }
    report.passed = report.max_full_error < full_tol && report.max_approx_error < approx_tol;
    return report;
}

}  // namespace fedarena
