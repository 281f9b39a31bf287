#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "fedarena/errors.hpp"
#include "fedarena/harness.hpp"

namespace fedarena {
namespace {

using nlohmann::json;

// Walks one JSON object, collecting "path: problem" messages instead of
// throwing on the first bad field.
class FieldReader {
public:
    FieldReader(const json& obj, std::string path, std::vector<std::string>& errors)
        : obj_(obj), path_(std::move(path)), errors_(errors) {
        if (!obj_.is_object()) error("", "expected an object");
    }

    ~FieldReader() = default;

    bool has(const std::string& key) const { return obj_.is_object() && obj_.contains(key) && !obj_[key].is_null(); }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void error(const std::string& key, const std::string& what) {
        errors_.push_back((key.empty() ? (path_.empty() ? std::string("<root>") : path_) : field(key)) + ": " + what);
    }

    template <typename T>
    void read(const std::string& key, T& out) {
        seen_.insert(key);
        if (!has(key)) return;
        const json& v = obj_[key];
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw std::invalid_argument("expected a boolean");
                out = v.get<bool>();
            } else if constexpr (std::is_unsigned_v<T>) {
                if (!v.is_number_unsigned()) throw std::invalid_argument("expected a non-negative integer");
                out = v.get<T>();
            } else if constexpr (std::is_integral_v<T>) {
                if (!v.is_number_integer()) throw std::invalid_argument("expected an integer");
                out = v.get<T>();
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!v.is_number()) throw std::invalid_argument("expected a number");
                out = v.get<T>();
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw std::invalid_argument("expected a string");
                out = v.get<std::string>();
            } else if constexpr (std::is_same_v<T, std::filesystem::path>) {
                if (!v.is_string()) throw std::invalid_argument("expected a path string");
                out = v.get<std::string>();
            } else {
                if (!v.is_array()) throw std::invalid_argument("expected an array");
                out = v.get<T>();
            }
        } catch (const std::exception& e) {
            error(key, e.what());
        }
    }

    const json* child(const std::string& key) {
        seen_.insert(key);
        return has(key) ? &obj_[key] : nullptr;
    }

    void reject_unknown() {
        if (!obj_.is_object()) return;
        for (const auto& [key, _] : obj_.items()) {
            if (!seen_.count(key)) error(key, "unknown field");
        }
    }

    const std::string& path() const { return path_; }

private:
    const json& obj_;
    std::string path_;
    std::vector<std::string>& errors_;
    std::set<std::string> seen_;
};

void read_pgd(const json& node, const std::string& path, PgdConfig& pgd, std::vector<std::string>& errors) {
    FieldReader r(node, path, errors);
    r.read("epsilon", pgd.epsilon);
    r.read("alpha", pgd.alpha);
    r.read("iterations", pgd.iterations);
    r.read("random_start", pgd.random_start);
    r.read("low", pgd.low);
    r.read("high", pgd.high);
    r.reject_unknown();
}

json pgd_json(const PgdConfig& p) {
    return {{"epsilon", p.epsilon}, {"alpha", p.alpha},   {"iterations", p.iterations},
            {"random_start", p.random_start}, {"low", p.low}, {"high", p.high}};
}

std::string mode_name(TrainMode m) {
    switch (m) {
        case TrainMode::Standard: return "standard";
        case TrainMode::Adversarial: return "adversarial";
        case TrainMode::AdversarialMix: return "adversarial_mix";
    }
    return "?";
}

void check_pgd(const PgdConfig& p, const std::string& path, std::vector<std::string>& errors) {
    try {
        p.validate();
    } catch (const std::invalid_argument& e) {
        errors.push_back(path + ": " + e.what());
    }
}

[[noreturn]] void throw_errors(const std::vector<std::string>& errors) {
    std::ostringstream os;
    os << "invalid experiment config:";
    for (const auto& e : errors) os << "\n  " << e;
    throw ConfigError(os.str());
}

}  // namespace

void ExperimentConfig::validate() const {
    std::vector<std::string> errors;
    if (dataset.kind == DatasetConfig::Kind::Synth) {
        if (dataset.class_count < 2) errors.emplace_back("dataset.class_count: must be >= 2");
        if (dataset.dim < 1) errors.emplace_back("dataset.dim: must be >= 1");
        if (dataset.per_class < 1) errors.emplace_back("dataset.per_class: must be >= 1");
        if (!(dataset.spread > 0.0)) errors.emplace_back("dataset.spread: must be > 0");
    } else {
        if (dataset.images.empty()) errors.emplace_back("dataset.images: path required");
        if (dataset.labels.empty()) errors.emplace_back("dataset.labels: path required");
    }
    if (!(concentration > 0.0)) errors.emplace_back("partition.concentration: must be > 0");
    if (!(test_fraction >= 0.0 && test_fraction < 1.0)) errors.emplace_back("partition.test_fraction: must be in [0,1)");
    if (n_clients < 1) errors.emplace_back("n_clients: must be >= 1");
    if (eval_every < 1) errors.emplace_back("eval_every: must be >= 1");
    for (auto h : hidden) {
        if (h == 0) errors.emplace_back("model.hidden: layer widths must be >= 1");
    }
    try {
        local.validate();
    } catch (const std::invalid_argument& e) {
        errors.push_back(std::string("client_mode: ") + e.what());
    }
    try {
        defense.validate();
    } catch (const std::invalid_argument& e) {
        errors.push_back(std::string("defense: ") + e.what());
    }
    check_pgd(eval_pgd, "eval_pgd", errors);
    if (threads < 0) errors.emplace_back("threads: must be >= 0");
    if (aru) {
        try {
            aru->validate(rounds, n_clients);
        } catch (const ConfigError& e) {
            errors.emplace_back(e.what());
        }
        if (aru->adversary_ids.size() >= n_clients) errors.emplace_back("aru.adversary_ids: at least one client must be benign");
    }
    if (!errors.empty()) throw_errors(errors);
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    if (cfg.dataset.kind == DatasetConfig::Kind::Synth) {
        j["dataset"] = {{"kind", "synth"},
                        {"class_count", cfg.dataset.class_count},
                        {"dim", cfg.dataset.dim},
                        {"per_class", cfg.dataset.per_class},
                        {"spread", cfg.dataset.spread}};
    } else {
        j["dataset"] = {{"kind", "idx"},
                        {"images", cfg.dataset.images.string()},
                        {"labels", cfg.dataset.labels.string()},
                        {"limit", cfg.dataset.limit}};
    }
    j["partition"] = {{"concentration", cfg.concentration}, {"test_fraction", cfg.test_fraction}};
    j["n_clients"] = cfg.n_clients;
    j["rounds"] = cfg.rounds;
    j["model"] = {{"hidden", cfg.hidden}};
    j["client_mode"] = {{"kind", mode_name(cfg.local.mode)}, {"epochs", cfg.local.epochs},
                        {"batch_size", cfg.local.batch_size}, {"lr", cfg.local.lr},
                        {"adv_fraction", cfg.local.adv_fraction}, {"pgd", pgd_json(cfg.local.pgd)}};
    j["defense"] = cfg.defense.to_string();
    if (cfg.aru) {
        const auto& a = *cfg.aru;
        json aj = {{"adversary_ids", a.adversary_ids},
                   {"mode", a.mode == AruMode::Extract ? "extract" : "known"},
                   {"attack_round", a.attack_round},
                   {"knowledge", a.knowledge == Knowledge::FullKnowledge ? "full" : "near_convergence"}};
        if (a.mode == AruMode::Extract) {
            aj["extract_rounds"] = a.extract_rounds;
            aj["extract"] = {{"lr", a.extract.lr},
                             {"epochs", a.extract.epochs},
                             {"batch_size", a.extract.batch_size},
                             {"pgd", pgd_json(a.extract.relabel_pgd)}};
        } else {
            aj["checkpoint"] = a.checkpoint.string();
        }
        j["aru"] = aj;
    } else {
        j["aru"] = nullptr;
    }
    j["eval_pgd"] = pgd_json(cfg.eval_pgd);
    j["eval_every"] = cfg.eval_every;
    j["threads"] = cfg.threads;
    j["trace_extraction"] = cfg.trace_extraction;
    return j;
}

ExperimentConfig config_from_json(const nlohmann::json& doc) {
    ExperimentConfig cfg;
    std::vector<std::string> errors;
    FieldReader root(doc, "", errors);
    root.read("seed", cfg.seed);
    root.read("n_clients", cfg.n_clients);
    root.read("rounds", cfg.rounds);
    root.read("eval_every", cfg.eval_every);
    root.read("threads", cfg.threads);
    root.read("trace_extraction", cfg.trace_extraction);

    if (const json* d = root.child("dataset")) {
        FieldReader r(*d, "dataset", errors);
        std::string kind = "synth";
        r.read("kind", kind);
        if (kind == "synth") {
            r.read("class_count", cfg.dataset.class_count);
            r.read("dim", cfg.dataset.dim);
            r.read("per_class", cfg.dataset.per_class);
            r.read("spread", cfg.dataset.spread);
        } else if (kind == "idx") {
            cfg.dataset.kind = DatasetConfig::Kind::Idx;
            r.read("images", cfg.dataset.images);
            r.read("labels", cfg.dataset.labels);
            r.read("limit", cfg.dataset.limit);
        } else {
            r.error("kind", "expected 'synth' or 'idx'");
        }
        r.reject_unknown();
    }
    if (const json* p = root.child("partition")) {
        FieldReader r(*p, "partition", errors);
        r.read("concentration", cfg.concentration);
        r.read("test_fraction", cfg.test_fraction);
        r.reject_unknown();
    }
    if (const json* m = root.child("model")) {
        FieldReader r(*m, "model", errors);
        r.read("hidden", cfg.hidden);
        r.reject_unknown();
    }
    if (const json* c = root.child("client_mode")) {
        FieldReader r(*c, "client_mode", errors);
        std::string kind = "standard";
        r.read("kind", kind);
        if (kind == "standard") {
            cfg.local.mode = TrainMode::Standard;
        } else if (kind == "adversarial") {
            cfg.local.mode = TrainMode::Adversarial;
        } else if (kind == "adversarial_mix" || kind == "fat") {
            cfg.local.mode = TrainMode::AdversarialMix;
        } else {
            r.error("kind", "expected standard, adversarial, adversarial_mix or fat");
        }
        r.read("epochs", cfg.local.epochs);
        r.read("batch_size", cfg.local.batch_size);
        r.read("lr", cfg.local.lr);
        r.read("adv_fraction", cfg.local.adv_fraction);
        if (const json* pg = r.child("pgd")) read_pgd(*pg, "client_mode.pgd", cfg.local.pgd, errors);
        r.reject_unknown();
    }
    if (const json* d = root.child("defense")) {
        try {
            if (d->is_string()) {
                cfg.defense = AggregationRule::parse(d->get<std::string>());
            } else {
                FieldReader r(*d, "defense", errors);
                std::string kind = "fedavg";
                r.read("kind", kind);
                double beta = 0.15;
                r.read("beta", beta);
                cfg.defense = kind == "trimmed" ? AggregationRule::trimmed_mean(beta) : AggregationRule::parse(kind);
                r.reject_unknown();
            }
        } catch (const std::invalid_argument& e) {
            errors.push_back(std::string("defense: ") + e.what());
        }
    }
    if (const json* a = root.child("aru")) {
        AruConfig aru;
        FieldReader r(*a, "aru", errors);
        std::size_t count = 0;
        r.read("adversaries", count);
        r.read("adversary_ids", aru.adversary_ids);
        if (aru.adversary_ids.empty()) {
            for (std::size_t i = 0; i < count; ++i) aru.adversary_ids.push_back(i);
        } else if (count != 0 && count != aru.adversary_ids.size()) {
            r.error("adversaries", "disagrees with adversary_ids");
        }
        std::string mode = "extract";
        r.read("mode", mode);
        if (mode == "extract") {
            aru.mode = AruMode::Extract;
        } else if (mode == "known") {
            aru.mode = AruMode::ReplaceKnownModel;
        } else {
            r.error("mode", "expected 'extract' or 'known'");
        }
        r.read("checkpoint", aru.checkpoint);
        r.read("attack_round", aru.attack_round);
        std::string knowledge = "near_convergence";
        r.read("knowledge", knowledge);
        if (knowledge == "full") {
            aru.knowledge = Knowledge::FullKnowledge;
        } else if (knowledge != "near_convergence") {
            r.error("knowledge", "expected 'near_convergence' or 'full'");
        }
        r.read("extract_rounds", aru.extract_rounds);
        if (const json* e = r.child("extract")) {
            FieldReader er(*e, "aru.extract", errors);
            er.read("lr", aru.extract.lr);
            er.read("epochs", aru.extract.epochs);
            er.read("batch_size", aru.extract.batch_size);
            if (const json* pg = er.child("pgd")) read_pgd(*pg, "aru.extract.pgd", aru.extract.relabel_pgd, errors);
            er.reject_unknown();
        }
        r.reject_unknown();
        cfg.aru = std::move(aru);
    }
    if (const json* e = root.child("eval_pgd")) read_pgd(*e, "eval_pgd", cfg.eval_pgd, errors);
    root.reject_unknown();

    if (!errors.empty()) throw_errors(errors);
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return config_from_json(doc);
}

}  // namespace fedarena
