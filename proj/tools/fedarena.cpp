// fedarena: federated adversarial training / ARU simulator.
//
//   fedarena run <config.json> [--seed N] [--out DIR] [--rounds N]
//                              [--defense fedavg|trimmed:<beta>|median] [--adversaries N]
//   fedarena preset <name> --out DIR [--seed N]
//   fedarena attack-check [--cases N] [--seed N]
//   fedarena inspect <checkpoint>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "fedarena/attack_check.hpp"
#include "fedarena/errors.hpp"
#include "fedarena/harness.hpp"

namespace {

using namespace fedarena;

void print_summary(const RunResult& result) {
    std::cout << std::fixed << std::setprecision(4);
    std::cout << "round  test_acc (std)      adv_acc (std)       adv_incl  benign_incl\n";
    for (const auto& m : result.metrics) {
        std::cout << std::setw(5) << m.round << "  " << m.test_acc_mean << " (" << m.test_acc_std << ")  "
                  << m.adv_acc_mean << " (" << m.adv_acc_std << ")";
        if (m.inclusion) std::cout << "  " << m.inclusion->adversary_inclusion << "    " << m.inclusion->benign_inclusion;
        std::cout << '\n';
    }
    if (!result.extraction.empty()) {
        std::cout << "extraction step  test_acc  adv_acc\n";
        for (const auto& e : result.extraction) {
            std::cout << std::setw(15) << e.step << "  " << e.test_acc_mean << "    " << e.adv_acc_mean << '\n';
        }
    }
}

int cmd_inspect(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    const ParamVector params = read_checkpoint(in);
    const MlpModel model = unflatten(params);
    std::cout << path << ": " << model.layer_count() << " dense layers, " << params.size() << " parameters\n";
    std::cout << "layer sizes:";
    for (auto s : model.layer_sizes()) std::cout << ' ' << s;
    std::cout << '\n';
    for (const auto& e : params.layout) {
        std::cout << "  layer " << e.layer << (e.kind == ParamKind::Weight ? " weight " : " bias   ") << e.rows;
        if (e.kind == ParamKind::Weight) std::cout << 'x' << e.cols;
        std::cout << '\n';
    }
    double sq = 0.0, mx = 0.0;
    for (double v : params.values) {
        sq += v * v;
        mx = std::max(mx, std::abs(v));
    }
    std::cout << "l2 norm " << std::sqrt(sq) << ", max |theta| " << mx << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated adversarial training and robustness-unhardening simulator"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run an experiment from a JSON config");
    std::string config_path;
    std::string out_dir = "fedarena-out";
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> rounds;
    std::optional<std::string> defense;
    std::optional<std::size_t> adversaries;
    run->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("--seed", seed, "Override the run seed");
    run->add_option("--out", out_dir, "Output directory");
    run->add_option("--rounds", rounds, "Override the number of rounds");
    run->add_option("--defense", defense, "fedavg, trimmed:<beta> or median");
    run->add_option("--adversaries", adversaries, "Number of ARU clients (ids 0..n-1); 0 disables ARU");

    auto* preset = app.add_subcommand("preset", "Run a desk-scale scenario preset");
    std::string preset_name;
    std::string preset_out;
    std::optional<std::uint64_t> preset_seed;
    preset->add_option("name", preset_name, "Preset name")->required()->check(CLI::IsMember(preset_names()));
    preset->add_option("--out", preset_out, "Output directory")->required();
    preset->add_option("--seed", preset_seed, "Override the preset seed");

    auto* check = app.add_subcommand("attack-check", "Verify model-replacement exactness on random instances");
    std::size_t cases = 50;
    std::uint64_t check_seed = 2024;
    check->add_option("--cases", cases, "Number of random instances");
    check->add_option("--seed", check_seed, "Instance seed");

    auto* inspect = app.add_subcommand("inspect", "Describe a model checkpoint");
    std::string ckpt;
    inspect->add_option("checkpoint", ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            ExperimentConfig cfg = load_config(config_path);
            if (seed) cfg.seed = *seed;
            if (rounds) {
                if (cfg.aru && cfg.aru->attack_round == cfg.rounds) cfg.aru->attack_round = *rounds;
                cfg.rounds = *rounds;
            }
            if (defense) cfg.defense = AggregationRule::parse(*defense);
            if (adversaries) {
                if (*adversaries == 0) {
                    cfg.aru.reset();
                } else {
                    if (!cfg.aru) throw ConfigError("--adversaries: config has no aru block to resize");
                    cfg.aru->adversary_ids.clear();
                    for (std::size_t i = 0; i < *adversaries; ++i) cfg.aru->adversary_ids.push_back(i);
                }
            }
            cfg.validate();
            const RunResult result = run_experiment(cfg);
            write_run_outputs(cfg, result, out_dir);
            print_summary(result);
            std::cout << "outputs written to " << out_dir << '\n';
            return 0;
        }
        if (*preset) {
            const RunResult result = run_preset(preset_name, preset_out, preset_seed);
            print_summary(result);
            std::cout << "outputs written to " << preset_out << '\n';
            return 0;
        }
        if (*check) {
            const ExactnessReport r = replacement_exactness_suite(cases, check_seed);
            std::cout << std::scientific << std::setprecision(3);
            std::cout << "full-knowledge replacement: max relative error " << r.max_full_error << " (tol 1e-9)\n";
            std::cout << "near-convergence replacement: max relative error " << r.max_approx_error << " (tol 1e-12)\n";
            std::cout << r.cases << " cases: " << (r.passed ? "PASS" : "FAIL") << '\n';
            return r.passed ? 0 : 1;
        }
        if (*inspect) return cmd_inspect(ckpt);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
