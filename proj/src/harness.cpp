#include "fedarena/harness.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <ostream>
#include <sstream>

#include <omp.h>

#include "fedarena/errors.hpp"
#include "fedarena/kernels.hpp"
#include "fedarena/rng.hpp"

namespace fedarena {
namespace {

enum SeedTag : std::uint64_t { kInit = 1, kPartition, kSplit, kTrain, kEval, kAru, kData };

std::string num(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

struct ClientData {
    Batch train;
    Batch test;
};

struct Federation {
    std::size_t input_dim = 0;
    std::size_t class_count = 0;
    std::vector<ClientData> clients;
    std::vector<double> weights;
};

Federation build_federation(const ExperimentConfig& cfg) {
    Dataset data;
    if (cfg.dataset.kind == DatasetConfig::Kind::Synth) {
        data = synth_blobs(cfg.dataset.class_count, cfg.dataset.dim, cfg.dataset.per_class, cfg.dataset.spread,
                           run_seeds::data(cfg.seed));
    } else {
        data = load_idx(cfg.dataset.images, cfg.dataset.labels);
        if (cfg.dataset.limit > 0 && cfg.dataset.limit < data.size()) {
            std::vector<std::size_t> head(cfg.dataset.limit);
            for (std::size_t i = 0; i < head.size(); ++i) head[i] = i;
            Batch b = data.subset(head);
            data.inputs = std::move(b.inputs);
            data.labels = std::move(b.labels);
        }
    }
    const Partition part = dirichlet_partition(data, cfg.n_clients, cfg.concentration, run_seeds::partition(cfg.seed));
    part.check(data.size());

    Federation fed;
    fed.input_dim = data.dim();
    fed.class_count = data.class_count;
    std::vector<std::size_t> counts;
    for (std::size_t c = 0; c < part.client_count(); ++c) {
        auto [train, test] = train_test_split(part.client_indices[c], cfg.test_fraction, run_seeds::split(cfg.seed, c));
        fed.clients.push_back({data.subset(train), data.subset(test)});
        counts.push_back(train.size());
    }
    fed.weights = sample_count_weights(counts);
    return fed;
}

// Runs fn(i) for i in [0, n) on the worker pool; rethrows the first failure
// in index order so error reporting is deterministic too.
template <typename Fn>
void fan_out(std::size_t n, Fn&& fn) {
    std::vector<std::exception_ptr> failures(n);
    const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        try {
            fn(static_cast<std::size_t>(i));
        } catch (...) {
            failures[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (auto& f : failures) {
        if (f) std::rethrow_exception(f);
    }
}

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& xs) {
    if (xs.empty()) return {};
    double sum = 0.0;
    for (double x : xs) sum += x;
    const double mean = sum / static_cast<double>(xs.size());
    double sq = 0.0;
    for (double x : xs) sq += (x - mean) * (x - mean);
    return {mean, std::sqrt(sq / static_cast<double>(xs.size()))};
}

// Per-client evaluation of `model` on each local test set.
std::pair<MeanStd, MeanStd> evaluate_clients(const MlpModel& model, const Federation& fed, const PgdConfig& pgd,
                                             std::uint64_t seed, std::size_t round) {
    std::vector<std::optional<EvalResult>> per(fed.clients.size());
    fan_out(fed.clients.size(), [&](std::size_t c) {
        if (fed.clients[c].test.empty()) return;
        per[c] = evaluate(model, fed.clients[c].test, pgd, derive_seed(seed, {kEval, round, c}));
    });
    std::vector<double> test, adv;
    for (const auto& r : per) {
        if (!r) continue;
        test.push_back(r->test_acc);
        adv.push_back(r->adv_acc);
    }
    return {mean_std(test), mean_std(adv)};
}

void require_finite(const ParamVector& p, std::size_t round) {
    for (double v : p.values) {
        if (!std::isfinite(v)) throw NumericError("round " + std::to_string(round) + ": aggregated model is not finite");
    }
}

}  // namespace

int resolve_threads(int configured) {
    if (configured > 0) return configured;
    if (const char* env = std::getenv("FEDARENA_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return omp_get_num_procs();
}

namespace run_seeds {
std::uint64_t data(std::uint64_t seed) { return derive_seed(seed, {kData}); }
std::uint64_t init(std::uint64_t seed) { return derive_seed(seed, {kInit}); }
std::uint64_t partition(std::uint64_t seed) { return derive_seed(seed, {kPartition}); }
std::uint64_t split(std::uint64_t seed, std::size_t client) { return derive_seed(seed, {kSplit, client}); }
std::uint64_t train(std::uint64_t seed, std::size_t round, std::size_t client) {
    return derive_seed(seed, {kTrain, round, client});
}
}  // namespace run_seeds

RunResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    kernels::set_max_threads(resolve_threads(cfg.threads));

    const Federation fed = build_federation(cfg);
    std::vector<std::size_t> sizes{fed.input_dim};
    sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
    sizes.push_back(fed.class_count);

    RunResult result;
    MlpModel global = MlpModel::random(sizes, run_seeds::init(cfg.seed));

    std::optional<AruCoalition> coalition;
    if (cfg.aru) {
        std::optional<MlpModel> known;
        Batch pooled;
        if (cfg.aru->mode == AruMode::ReplaceKnownModel) {
            known = load_checkpoint(cfg.aru->checkpoint);
            if (known->layout() != global.layout()) {
                throw LayoutError("aru.checkpoint: model architecture does not match the federation's");
            }
        } else {
            pooled.inputs = Matrix(0, fed.input_dim);
            for (auto id : cfg.aru->adversary_ids) {
                const auto& t = fed.clients[id].train;
                pooled.inputs.data().insert(pooled.inputs.data().end(), t.inputs.data().begin(), t.inputs.data().end());
                pooled.labels.insert(pooled.labels.end(), t.labels.begin(), t.labels.end());
            }
            pooled.inputs = Matrix(pooled.labels.size(), fed.input_dim, std::move(pooled.inputs.data()));
        }
        coalition.emplace(*cfg.aru, std::move(pooled), std::move(known), derive_seed(cfg.seed, {kAru}));
    }

    auto record = [&](std::size_t round, std::optional<InclusionStats> inclusion, double wall_ms) {
        auto [test, adv] = evaluate_clients(global, fed, cfg.eval_pgd, cfg.seed, round);
        result.metrics.push_back({round, test.mean, test.std, adv.mean, adv.std, inclusion, wall_ms});
    };
    record(0, std::nullopt, 0.0);

    const bool robust_rule = cfg.defense.kind != RuleKind::FedAvg;
    for (std::size_t round = 1; round <= cfg.rounds; ++round) {
        const auto t0 = std::chrono::steady_clock::now();
        const ParamVector global_params = flatten(global);
        const RoundBroadcast broadcast{round, &global_params};

        if (coalition) {
            const bool first_step = coalition->in_extraction_window(round) && !coalition->in_extraction_window(round - 1);
            if (first_step && cfg.trace_extraction) {
                auto [test, adv] = evaluate_clients(global, fed, cfg.eval_pgd, derive_seed(cfg.seed, {kAru}), 0);
                result.extraction.push_back({round, 0, test.mean, adv.mean});
            }
            if (coalition->observe(broadcast) && cfg.trace_extraction) {
                const std::size_t step = round + cfg.aru->extract_rounds - cfg.aru->attack_round;
                auto [test, adv] = evaluate_clients(*coalition->target(), fed, cfg.eval_pgd,
                                                    derive_seed(cfg.seed, {kAru}), step);
                result.extraction.push_back({round, step, test.mean, adv.mean});
            }
        }
        const bool attack = coalition && coalition->is_attack_round(round);

        std::vector<ClientUpdate> updates(fed.clients.size());
        fan_out(fed.clients.size(), [&](std::size_t c) {
            ClientUpdate& u = updates[c];
            u.client_id = c;
            u.weight = fed.weights[c];
            u.is_adversary = coalition && coalition->is_adversary(c);
            if (attack && u.is_adversary) return;  // crafted below
            try {
                u.params =
                    flatten(local_train(global, fed.clients[c].train, cfg.local, run_seeds::train(cfg.seed, round, c)));
            } catch (const NumericError& e) {
                throw NumericError("round " + std::to_string(round) + ", client " + std::to_string(c) + ": " + e.what());
            }
        });

        if (attack) {
            std::vector<ClientUpdate> benign;
            if (cfg.aru->knowledge == Knowledge::FullKnowledge) {
                for (const auto& u : updates) {
                    if (!u.is_adversary) benign.push_back(u);
                }
            }
            std::vector<double> adv_weights;
            for (auto id : cfg.aru->adversary_ids) adv_weights.push_back(fed.weights[id]);
            auto crafted = coalition->craft_attack(broadcast, adv_weights, benign);
            for (auto& u : crafted) updates[u.client_id] = std::move(u);
        }

        ParamVector next = aggregate(global_params, updates, cfg.defense);
        require_finite(next, round);
        std::optional<InclusionStats> inclusion;
        if (robust_rule && coalition) inclusion = inclusion_stats(global_params, updates, cfg.defense);
        global = unflatten(next);

        const double wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        if (round % cfg.eval_every == 0 || round == cfg.rounds) record(round, inclusion, wall_ms);
    }

    result.final_model = std::move(global);
    if (coalition) result.aru_target = coalition->target();
    return result;
}

void write_metrics_csv(const std::vector<RoundMetrics>& metrics, std::ostream& out, bool include_wall_time) {
    out << "round,test_acc_mean,test_acc_std,adv_acc_mean,adv_acc_std,adv_inclusion,benign_inclusion";
    if (include_wall_time) out << ",wall_ms";
    out << '\n';
    for (const auto& m : metrics) {
        out << m.round << ',' << num(m.test_acc_mean) << ',' << num(m.test_acc_std) << ',' << num(m.adv_acc_mean)
            << ',' << num(m.adv_acc_std) << ',';
        if (m.inclusion) out << num(m.inclusion->adversary_inclusion) << ',' << num(m.inclusion->benign_inclusion);
        else out << ',';
        if (include_wall_time) out << ',' << num(std::round(m.wall_ms * 1000.0) / 1000.0);
        out << '\n';
    }
}

void write_metrics_csv(const std::vector<RoundMetrics>& metrics, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_metrics_csv(metrics, out);
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_extraction_csv(const std::vector<ExtractionMetrics>& rows, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "round,step,test_acc_mean,adv_acc_mean\n";
    for (const auto& r : rows) {
        out << r.round << ',' << r.step << ',' << num(r.test_acc_mean) << ',' << num(r.adv_acc_mean) << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_run_outputs(const ExperimentConfig& cfg, const RunResult& result, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    write_metrics_csv(result.metrics, out_dir / "metrics.csv");
    save_checkpoint(result.final_model, out_dir / "final_model.ckpt");
    if (!result.extraction.empty()) write_extraction_csv(result.extraction, out_dir / "extraction.csv");
    if (result.aru_target) save_checkpoint(*result.aru_target, out_dir / "aru_target.ckpt");
    nlohmann::json manifest;
    manifest["config"] = to_json(cfg);
    manifest["threads"] = resolve_threads(cfg.threads);
    manifest["outputs"] = {"metrics.csv", "final_model.ckpt"};
    if (!result.extraction.empty()) manifest["outputs"].push_back("extraction.csv");
    if (result.aru_target) manifest["outputs"].push_back("aru_target.ckpt");
    std::ofstream out(out_dir / "manifest.json");
    if (!out) throw std::runtime_error("cannot write " + (out_dir / "manifest.json").string());
    out << manifest.dump(2) << '\n';
}

}  // namespace fedarena
