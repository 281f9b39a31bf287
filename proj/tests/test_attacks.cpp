#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "fedarena/attacks.hpp"
#include "fedarena/data.hpp"
#include "fedarena/training.hpp"
#include "oracles.hpp"

using namespace fedarena;

namespace {

void check_budget(const AdvBatch& adv, const PgdConfig& cfg) {
    const auto& x = adv.original.inputs.data();
    const auto& xp = adv.perturbed_inputs.data();
    REQUIRE(x.size() == xp.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(std::abs(xp[i] - x[i]) <= cfg.epsilon + 1e-9);
        CHECK(xp[i] >= cfg.low);
        CHECK(xp[i] <= cfg.high);
    }
}

MlpModel trained_blob_model(const Dataset& data) {
    LocalTrainConfig cfg;
    cfg.epochs = 5;
    cfg.batch_size = 16;
    return local_train(MlpModel::random({data.dim(), 32, data.class_count}, 3), data.batch(), cfg, 4);
}

}  // namespace

TEST_CASE("config validation") {
    CHECK_NOTHROW(PgdConfig{}.validate());
    CHECK_THROWS_AS((PgdConfig{-0.1, 0.01, 1, false}).validate(), std::invalid_argument);
    CHECK_THROWS_AS((PgdConfig{0.1, 0.0, 1, false}).validate(), std::invalid_argument);
    CHECK_THROWS_AS((PgdConfig{0.1, 0.01, 1, false, 1.0, 0.0}).validate(), std::invalid_argument);
}

TEST_CASE("zero budget and zero iterations leave inputs untouched") {
    const MlpModel m = oracle::random_model({6, 5, 3}, 1);
    std::mt19937_64 rng(2);
    const Batch b = oracle::random_batch(10, 6, 3, rng);
    CHECK(pgd_perturb(m, b, PgdConfig{0.0, 0.01, 5, true}, 9) == b.inputs);
    CHECK(pgd_perturb(m, b, PgdConfig{0.1, 0.01, 0, false}, 9) == b.inputs);
    CHECK(robust_accuracy(m, b, PgdConfig{0.0, 0.01, 5, true}, 9) == accuracy(m, b));
}

TEST_CASE("linear binary classifier: one step follows the finite-difference sign") {
    MlpModel m({4, 2});
    m.weight(0) = Matrix(2, 4, {1.0, -2.0, 0.5, 0.0, -1.0, 1.0, -0.25, 3.0});
    m.bias(0) = {0.1, -0.2};
    const Batch b{Matrix(2, 4, {0.5, 0.5, 0.5, 0.5, 0.02, 0.97, 0.3, 0.6}), {0, 1}};
    const std::vector<double> fd = oracle::fd_input_grads(m, b);
    const PgdConfig one{0.1, 0.03, 1, false};
    const Matrix p1 = pgd_perturb(m, b, one, 0);
    const PgdConfig many{0.1, 0.03, 8, false};
    const Matrix pn = pgd_perturb(m, b, many, 0);
    for (std::size_t i = 0; i < fd.size(); ++i) {
        const double s = fd[i] > 0 ? 1.0 : fd[i] < 0 ? -1.0 : 0.0;
        const double x = b.inputs.data()[i];
        CHECK(p1.data()[i] == doctest::Approx(std::clamp(x + one.alpha * s, 0.0, 1.0)).epsilon(1e-15));
        // Constant gradient sign: further steps saturate on the ball boundary.
        CHECK(pn.data()[i] == doctest::Approx(std::clamp(x + many.epsilon * s, 0.0, 1.0)).epsilon(1e-15));
    }
}

TEST_CASE("every crafted batch respects the budget and bounds") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const MlpModel m = oracle::random_model({8, 6, 4}, seed);
        std::mt19937_64 rng(seed);
        const Batch b = oracle::random_batch(12, 8, 4, rng);
        for (double eps : {0.01, 0.1, 0.3}) {
            const PgdConfig cfg{eps, eps / 3.0, 7, seed % 2 == 0};
            check_budget(pgd_attack(m, b, cfg, seed), cfg);
        }
    }
}

TEST_CASE("attacks are deterministic for a fixed seed") {
    const MlpModel m = oracle::random_model({5, 4, 3}, 8);
    std::mt19937_64 rng(8);
    const Batch b = oracle::random_batch(9, 5, 3, rng);
    const PgdConfig cfg{};
    CHECK(pgd_perturb(m, b, cfg, 42) == pgd_perturb(m, b, cfg, 42));
    CHECK(pgd_perturb(m, b, cfg, 42) != pgd_perturb(m, b, cfg, 43));
}

TEST_CASE("constant-output model is not fooled") {
    MlpModel m({5, 3});
    std::mt19937_64 rng(1);
    const Batch b = oracle::random_batch(20, 5, 3, rng);
    CHECK(robust_accuracy(m, b, PgdConfig{}, 5) == accuracy(m, b));
}

TEST_CASE("robust accuracy falls as the budget grows") {
    const Dataset data = synth_blobs(4, 8, 60, 0.1, 12);
    const MlpModel m = trained_blob_model(data);
    const Batch b = data.batch();
    const double clean = accuracy(m, b);
    double prev = clean;
    for (double eps : {0.05, 0.1, 0.2}) {
        const double r = robust_accuracy(m, b, PgdConfig{eps, eps / 4, 10, true}, 77);
        CHECK(r <= prev);
        prev = r;
    }
    CHECK(prev < clean);
}
