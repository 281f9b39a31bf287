#pragma once

// Federated round loop, experiment configuration, presets and run outputs.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedarena/adversary.hpp"
#include "fedarena/aggregation.hpp"
#include "fedarena/attacks.hpp"
#include "fedarena/data.hpp"
#include "fedarena/training.hpp"

namespace fedarena {

struct DatasetConfig {
    enum class Kind { Synth, Idx };
    Kind kind = Kind::Synth;
    // synth
    std::size_t class_count = 10;
    std::size_t dim = 32;
    std::size_t per_class = 300;
    double spread = 0.1;
    // idx
    std::filesystem::path images;
    std::filesystem::path labels;
    std::size_t limit = 0;  // 0 = all examples
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    DatasetConfig dataset{};
    double concentration = 0.4;   // Dirichlet non-iid strength
    double test_fraction = 0.2;   // per-client local test split
    std::size_t n_clients = 40;
    std::size_t rounds = 200;
    std::vector<std::size_t> hidden{64};
    LocalTrainConfig local{};     // mode Standard = FedAvg clients, otherwise FAT
    AggregationRule defense{};
    std::optional<AruConfig> aru;
    PgdConfig eval_pgd{};
    std::size_t eval_every = 10;
    int threads = 0;              // 0 = FEDARENA_THREADS or the OpenMP default
    bool trace_extraction = true;

    // ConfigError listing "field.path: problem" for every violation.
    void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
// ConfigError with field paths on malformed documents; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

struct RoundMetrics {
    std::size_t round = 0;
    double test_acc_mean = 0.0;
    double test_acc_std = 0.0;
    double adv_acc_mean = 0.0;
    double adv_acc_std = 0.0;
    std::optional<InclusionStats> inclusion;  // robust rule with adversaries present
    double wall_ms = 0.0;
};

// Extracted-model quality, step 0 being the model extraction started from.
struct ExtractionMetrics {
    std::size_t round = 0;  // federation round of the step
    std::size_t step = 0;
    double test_acc_mean = 0.0;
    double adv_acc_mean = 0.0;
};

struct RunResult {
    std::vector<RoundMetrics> metrics;
    std::vector<ExtractionMetrics> extraction;
    MlpModel final_model;
    std::optional<MlpModel> aru_target;  // extracted or known model, when ARU ran
};

/// Seeds of the independent random streams inside one run, all derived from
/// the experiment seed. Public so a run can be reproduced piece by piece.
namespace run_seeds {
std::uint64_t data(std::uint64_t seed);
std::uint64_t init(std::uint64_t seed);
std::uint64_t partition(std::uint64_t seed);
std::uint64_t split(std::uint64_t seed, std::size_t client);
std::uint64_t train(std::uint64_t seed, std::size_t round, std::size_t client);
}  // namespace run_seeds

RunResult run_experiment(const ExperimentConfig& cfg);

// Resolved worker count: cfg.threads, else FEDARENA_THREADS, else OpenMP default.
int resolve_threads(int configured);

void write_metrics_csv(const std::vector<RoundMetrics>& metrics, std::ostream& out, bool include_wall_time = true);
void write_metrics_csv(const std::vector<RoundMetrics>& metrics, const std::filesystem::path& path);
void write_extraction_csv(const std::vector<ExtractionMetrics>& rows, const std::filesystem::path& path);

// metrics.csv, final_model.ckpt, manifest.json and (ARU-E) extraction.csv, aru_target.ckpt.
void write_run_outputs(const ExperimentConfig& cfg, const RunResult& result, const std::filesystem::path& out_dir);

// Desk-scale scenario presets: fedavg, fat, aru-known, aru-extract,
// aru-extract-median, aru-extract-trimmed.
std::vector<std::string> preset_names();
// aru-known's checkpoint path is left empty; run_preset fills it.
ExperimentConfig preset_config(const std::string& name);

// Runs a preset into out_dir. aru-known first trains the fedavg preset into
// out_dir/reference and replaces toward its final model.
RunResult run_preset(const std::string& name, const std::filesystem::path& out_dir,
                     const std::optional<std::uint64_t>& seed = std::nullopt, int threads = 0);

}  // namespace fedarena
