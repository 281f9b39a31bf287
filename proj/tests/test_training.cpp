#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "fedarena/data.hpp"
#include "fedarena/training.hpp"
#include "oracles.hpp"

using namespace fedarena;

TEST_CASE("config validation") {
    CHECK_NOTHROW(LocalTrainConfig{}.validate());
    LocalTrainConfig c;
    c.epochs = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.mode = TrainMode::AdversarialMix;
    c.adv_fraction = 1.5;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("empty client data is rejected") {
    CHECK_THROWS_AS(local_train(MlpModel({2, 2}), Batch{Matrix(0, 2), {}}, LocalTrainConfig{}, 1),
                    std::invalid_argument);
}

TEST_CASE("a vanishing learning rate leaves the model in place") {
    const Dataset data = synth_blobs(3, 6, 20, 0.2, 1);
    const MlpModel m = MlpModel::random({6, 8, 3}, 2);
    LocalTrainConfig cfg;
    cfg.lr = 1e-12;
    cfg.epochs = 3;
    const auto before = flatten(m).values;
    const auto after = flatten(local_train(m, data.batch(), cfg, 3)).values;
    double max_diff = 0.0;
    for (std::size_t i = 0; i < before.size(); ++i) max_diff = std::max(max_diff, std::abs(after[i] - before[i]));
    CHECK(max_diff < 1e-6);
}

TEST_CASE("adversarial training with a zero budget follows the standard trajectory") {
    const Dataset data = synth_blobs(3, 6, 30, 0.2, 4);
    const MlpModel m = MlpModel::random({6, 8, 3}, 5);
    LocalTrainConfig standard;
    standard.epochs = 2;
    standard.batch_size = 7;
    LocalTrainConfig adv = standard;
    adv.pgd.epsilon = 0.0;
    adv.mode = TrainMode::Adversarial;
    CHECK(local_train(m, data.batch(), standard, 9) == local_train(m, data.batch(), adv, 9));
    adv.mode = TrainMode::AdversarialMix;
    CHECK(local_train(m, data.batch(), standard, 9) == local_train(m, data.batch(), adv, 9));
}

TEST_CASE("a full-batch standard step is one SGD update") {
    const Dataset data = synth_blobs(3, 5, 4, 0.2, 6);
    const MlpModel m = MlpModel::random({5, 4, 3}, 7);
    LocalTrainConfig cfg;
    cfg.batch_size = data.size();
    MlpModel manual = m;
    sgd_step(manual, loss_and_grads(m, data.batch()).param_grads, cfg.lr);
    // Full-batch gradients are order independent up to summation order.
    const auto a = flatten(local_train(m, data.batch(), cfg, 1)).values;
    const auto b = flatten(manual).values;
    CHECK(oracle::max_rel_error(a, b) < 1e-12);
}

TEST_CASE("local training is deterministic per seed") {
    const Dataset data = synth_blobs(3, 6, 30, 0.2, 4);
    const MlpModel m = MlpModel::random({6, 8, 3}, 5);
    LocalTrainConfig cfg;
    cfg.mode = TrainMode::AdversarialMix;
    cfg.batch_size = 8;
    CHECK(local_train(m, data.batch(), cfg, 1) == local_train(m, data.batch(), cfg, 1));
    CHECK_FALSE(local_train(m, data.batch(), cfg, 1) == local_train(m, data.batch(), cfg, 2));
}

TEST_CASE("adversarial training buys robustness") {
    const Dataset train = synth_blobs(4, 16, 80, 0.1, 31);
    const Dataset test = synth_blobs(4, 16, 40, 0.1, 31);  // same centers, fresh noise stream not required
    const MlpModel init = MlpModel::random({16, 32, 4}, 32);
    LocalTrainConfig cfg;
    cfg.epochs = 15;
    cfg.batch_size = 16;
    cfg.pgd = PgdConfig{0.1, 0.025, 10, true};
    const MlpModel standard = local_train(init, train.batch(), cfg, 33);
    cfg.mode = TrainMode::Adversarial;
    const MlpModel robust = local_train(init, train.batch(), cfg, 33);
    const EvalResult s = evaluate(standard, test.batch(), cfg.pgd, 34);
    const EvalResult r = evaluate(robust, test.batch(), cfg.pgd, 34);
    MESSAGE("standard adv_acc " << s.adv_acc << ", adversarial adv_acc " << r.adv_acc);
    CHECK(r.adv_acc > s.adv_acc);
    CHECK(s.test_acc > 0.9);
}

TEST_CASE("an untrained model sits near chance") {
    const Dataset data = synth_blobs(10, 16, 50, 0.2, 40);
    const EvalResult e = evaluate(MlpModel({16, 10}), data.batch(), PgdConfig{}, 1);
    CHECK(e.test_acc == doctest::Approx(0.1));
    CHECK(e.adv_acc == doctest::Approx(0.1));
}
