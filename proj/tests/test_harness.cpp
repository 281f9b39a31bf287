#include <cmath>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fedarena/errors.hpp"
#include "fedarena/harness.hpp"
#include "idx_fixtures.hpp"

using namespace fedarena;

namespace {

ExperimentConfig tiny(std::size_t rounds = 4) {
    ExperimentConfig cfg;
    cfg.seed = 5;
    cfg.dataset.class_count = 3;
    cfg.dataset.dim = 6;
    cfg.dataset.per_class = 40;
    cfg.dataset.spread = 0.15;
    cfg.n_clients = 4;
    cfg.rounds = rounds;
    cfg.hidden = {8};
    cfg.local.batch_size = 8;
    cfg.eval_pgd = PgdConfig{0.1, 0.05, 3, true};
    cfg.local.pgd = cfg.eval_pgd;
    cfg.eval_every = 2;
    return cfg;
}

AruConfig tiny_extract(std::size_t attack_round) {
    AruConfig aru;
    aru.adversary_ids = {0, 1};
    aru.mode = AruMode::Extract;
    aru.attack_round = attack_round;
    aru.extract_rounds = 2;
    aru.extract.relabel_pgd = PgdConfig{0.1, 0.05, 3, true};
    aru.extract.batch_size = 8;
    return aru;
}

std::string csv_of(const RunResult& r) {
    std::ostringstream os;
    write_metrics_csv(r.metrics, os, false);
    return os.str();
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream is(text);
    for (std::string line; std::getline(is, line);) out.push_back(line);
    return out;
}

std::string config_error(const nlohmann::json& doc) {
    try {
        config_from_json(doc);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("zero rounds evaluates only the initial model") {
    const RunResult r = run_experiment(tiny(0));
    REQUIRE(r.metrics.size() == 1);
    CHECK(r.metrics[0].round == 0);
    const auto rows = lines(csv_of(r));
    CHECK(rows.size() == 2);
    CHECK(rows[0] == "round,test_acc_mean,test_acc_std,adv_acc_mean,adv_acc_std,adv_inclusion,benign_inclusion");
}

TEST_CASE("metrics CSV header and row schedule") {
    ExperimentConfig cfg = tiny(7);
    cfg.eval_every = 3;
    const RunResult r = run_experiment(cfg);
    std::vector<std::size_t> rounds;
    for (const auto& m : r.metrics) {
        rounds.push_back(m.round);
        CHECK(m.test_acc_mean >= 0.0);
        CHECK(m.test_acc_mean <= 1.0);
        CHECK(m.adv_acc_std >= 0.0);
        CHECK_FALSE(m.inclusion.has_value());
    }
    CHECK(rounds == std::vector<std::size_t>{0, 3, 6, 7});  // ceil(7/3) + 1 rows
    std::ostringstream os;
    write_metrics_csv(r.metrics, os);
    const auto rows = lines(os.str());
    CHECK(rows[0] == "round,test_acc_mean,test_acc_std,adv_acc_mean,adv_acc_std,adv_inclusion,benign_inclusion,wall_ms");
    CHECK(rows.size() == 5);
    CHECK(rows[1].rfind("0,", 0) == 0);
    CHECK(rows[1].find(",,,") != std::string::npos);  // empty inclusion columns
}

TEST_CASE("a federation of one client is plain local training") {
    ExperimentConfig cfg = tiny(3);
    cfg.n_clients = 1;
    cfg.local.mode = TrainMode::AdversarialMix;
    const RunResult r = run_experiment(cfg);

    const Dataset data = synth_blobs(3, 6, 40, 0.15, run_seeds::data(cfg.seed));
    std::vector<std::size_t> all(data.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const auto split = train_test_split(all, cfg.test_fraction, run_seeds::split(cfg.seed, 0));
    const Batch train = data.subset(split.first);
    MlpModel m = MlpModel::random({6, 8, 3}, run_seeds::init(cfg.seed));
    for (std::size_t round = 1; round <= 3; ++round) m = local_train(m, train, cfg.local, run_seeds::train(cfg.seed, round, 0));
    CHECK(r.final_model == m);
}

TEST_CASE("runs are deterministic regardless of worker count") {
    ExperimentConfig cfg = tiny(4);
    cfg.local.mode = TrainMode::AdversarialMix;
    cfg.defense = AggregationRule::median();
    cfg.aru = tiny_extract(4);
    cfg.threads = 1;
    const RunResult a = run_experiment(cfg);
    cfg.threads = 3;
    const RunResult b = run_experiment(cfg);
    CHECK(csv_of(a) == csv_of(b));
    CHECK(a.final_model == b.final_model);
    REQUIRE(a.aru_target.has_value());
    CHECK(*a.aru_target == *b.aru_target);
    CHECK(a.extraction.size() == 3);  // starting point plus two steps
}

TEST_CASE("inclusion columns are filled on every evaluated round under a robust rule") {
    ExperimentConfig cfg = tiny(4);
    cfg.defense = AggregationRule::trimmed_mean(0.25);
    cfg.aru = tiny_extract(4);
    const RunResult r = run_experiment(cfg);
    for (const auto& m : r.metrics) {
        CHECK(m.inclusion.has_value() == (m.round > 0));
        if (m.inclusion) {
            CHECK(m.inclusion->adversary_inclusion >= 0.0);
            CHECK(m.inclusion->adversary_inclusion <= 1.0);
        }
    }
}

TEST_CASE("an extraction attack with no defense replaces the global model") {
    ExperimentConfig cfg = tiny(4);
    cfg.aru = tiny_extract(4);
    const RunResult r = run_experiment(cfg);
    REQUIRE(r.aru_target.has_value());
    const auto got = flatten(r.final_model).values, want = flatten(*r.aru_target).values;
    double err = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        err = std::max(err, std::abs(got[i] - want[i]));
        scale = std::max(scale, std::abs(want[i]));
    }
    // Benign clients still move, so only the near-convergence error term remains.
    CHECK(err / scale < 0.5);
}

TEST_CASE("adversary tags alone do not change aggregation") {
    std::vector<ClientUpdate> ups;
    for (std::size_t i = 0; i < 5; ++i) {
        ups.push_back({i, ParamVector{{LayoutEntry{0, ParamKind::Bias, 2, 1}}, {double(i), double(i * i)}}, 0.2, false});
    }
    const ParamVector g{{LayoutEntry{0, ParamKind::Bias, 2, 1}}, {0.5, 0.5}};
    for (auto rule : {AggregationRule::fedavg(), AggregationRule::median(), AggregationRule::trimmed_mean(0.2)}) {
        const ParamVector before = aggregate(g, ups, rule);
        auto tagged = ups;
        tagged[1].is_adversary = tagged[4].is_adversary = true;
        CHECK(aggregate(g, tagged, rule) == before);
    }
}

TEST_CASE("config JSON round-trips") {
    ExperimentConfig cfg = tiny(6);
    cfg.local.mode = TrainMode::AdversarialMix;
    cfg.defense = AggregationRule::trimmed_mean(0.2);
    cfg.aru = tiny_extract(6);
    const nlohmann::json doc = to_json(cfg);
    CHECK(to_json(config_from_json(doc)) == doc);
}

TEST_CASE("config errors carry field paths") {
    nlohmann::json doc = to_json(tiny());
    doc["client_mode"]["lr"] = -1.0;
    CHECK(config_error(doc).find("client_mode") != std::string::npos);

    doc = to_json(tiny());
    doc["defense"] = "krum";
    CHECK(config_error(doc).find("defense") != std::string::npos);

    doc = to_json(tiny());
    doc["bogus"] = 1;
    CHECK(config_error(doc).find("bogus: unknown field") != std::string::npos);

    doc = to_json(tiny());
    doc["eval_pgd"]["epsilon"] = "wide";
    CHECK(config_error(doc).find("eval_pgd.epsilon") != std::string::npos);

    ExperimentConfig cfg = tiny(4);
    cfg.aru = tiny_extract(4);
    cfg.aru->extract_rounds = 6;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("aru.attack_round"), ConfigError);
    cfg = tiny(4);
    cfg.n_clients = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("divergent training aborts with the round") {
    ExperimentConfig cfg = tiny(3);
    cfg.local.lr = 1e300;
    CHECK_THROWS_WITH_AS(run_experiment(cfg), doctest::Contains("round 1"), NumericError);
}

TEST_CASE("run outputs and IDX-backed runs") {
    const auto dir = fixtures::scratch_dir("test-harness-out");
    // A tiny IDX corpus: 12 images of 2x2 pixels, three classes.
    Dataset d;
    d.inputs = Matrix(12, 4);
    d.labels.resize(12);
    for (std::size_t i = 0; i < 12; ++i) {
        d.labels[i] = i % 3;
        for (std::size_t j = 0; j < 4; ++j) d.inputs(i, j) = static_cast<double>((i % 3) * 80 + j * 10) / 255.0;
    }
    d.class_count = 3;
    write_idx(d, 2, 2, dir / "img", dir / "lab");

    ExperimentConfig cfg = tiny(2);
    cfg.dataset.kind = DatasetConfig::Kind::Idx;
    cfg.dataset.images = dir / "img";
    cfg.dataset.labels = dir / "lab";
    cfg.n_clients = 2;
    const RunResult r = run_experiment(cfg);
    write_run_outputs(cfg, r, dir / "run");
    for (const char* f : {"metrics.csv", "final_model.ckpt", "manifest.json"}) CHECK(std::filesystem::exists(dir / "run" / f));
    CHECK(load_checkpoint(dir / "run" / "final_model.ckpt") == r.final_model);
    std::ifstream manifest(dir / "run" / "manifest.json");
    const auto doc = nlohmann::json::parse(manifest);
    CHECK(doc.contains("config"));
}
