#include "fedarena/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "fedarena/errors.hpp"
#include "fedarena/kernels.hpp"
#include "fedarena/rng.hpp"

namespace fedarena {
namespace {

constexpr const char* kCheckpointHeader = "fedarena-model v1";

struct Activations {
    std::vector<Matrix> inputs;       // input to layer k (post-ReLU of k-1)
    std::vector<Matrix> preacts;      // W_k a_k + b_k
};

Activations run_forward(const MlpModel& model, const Matrix& inputs) {
    if (inputs.cols() != model.input_dim()) {
        throw ShapeError("forward: input width " + std::to_string(inputs.cols()) + " != model input dim " +
                         std::to_string(model.input_dim()));
    }
    Activations acts;
    acts.inputs.reserve(model.layer_count());
    acts.preacts.reserve(model.layer_count());
    Matrix current = inputs;
    for (std::size_t k = 0; k < model.layer_count(); ++k) {
        Matrix z = kernels::gemm_nt(current, model.weight(k));
        const auto& b = model.bias(k);
        for (std::size_t r = 0; r < z.rows(); ++r) {
            auto row = z.row(r);
            for (std::size_t c = 0; c < row.size(); ++c) row[c] += b[c];
        }
        acts.inputs.push_back(std::move(current));
        if (k + 1 < model.layer_count()) {
            current = z;
            for (double& v : current.data()) v = v > 0.0 ? v : 0.0;
        }
        acts.preacts.push_back(std::move(z));
    }
    return acts;
}

// Mean cross-entropy and d loss / d logits.
double softmax_xent(const Matrix& logits, std::span<const std::size_t> labels, Matrix* dlogits) {
    const std::size_t n = logits.rows();
    const double inv_n = 1.0 / static_cast<double>(n);
    double total = 0.0;
    if (dlogits) *dlogits = Matrix(n, logits.cols());
    for (std::size_t r = 0; r < n; ++r) {
        const auto row = logits.row(r);
        const double mx = *std::max_element(row.begin(), row.end());
        double sum = 0.0;
        for (double v : row) sum += std::exp(v - mx);
        const double log_z = mx + std::log(sum);
        total += log_z - row[labels[r]];
        if (dlogits) {
            auto g = dlogits->row(r);
            for (std::size_t c = 0; c < row.size(); ++c) g[c] = std::exp(row[c] - log_z) * inv_n;
            g[labels[r]] -= inv_n;
        }
    }
    return total * inv_n;
}

double backprop(const MlpModel& model, const Batch& batch, ParamVector* param_grads, Matrix* input_grads) {
    if (batch.empty()) throw std::invalid_argument("loss_and_grads: empty batch");
    validate_batch(batch, model.input_dim(), model.class_count());

    const Activations acts = run_forward(model, batch.inputs);
    Matrix delta;
    const double loss = softmax_xent(acts.preacts.back(), batch.labels, &delta);

    std::vector<Matrix> weight_grads(model.layer_count());
    std::vector<std::vector<double>> bias_grads(model.layer_count());
    for (std::size_t k = model.layer_count(); k-- > 0;) {
        if (param_grads) {
            weight_grads[k] = kernels::gemm_tn(delta, acts.inputs[k]);
            auto& bg = bias_grads[k];
            bg.assign(delta.cols(), 0.0);
            for (std::size_t r = 0; r < delta.rows(); ++r) {
                const auto row = delta.row(r);
                for (std::size_t c = 0; c < row.size(); ++c) bg[c] += row[c];
            }
        }
        if (k == 0 && !input_grads) break;
        Matrix upstream = kernels::gemm_nn(delta, model.weight(k));
        if (k > 0) {
            // ReLU subgradient at 0 is 0.
            const Matrix& z = acts.preacts[k - 1];
            for (std::size_t i = 0; i < upstream.size(); ++i) {
                if (!(z.data()[i] > 0.0)) upstream.data()[i] = 0.0;
            }
        }
        delta = std::move(upstream);
    }
    if (input_grads) *input_grads = std::move(delta);

    if (param_grads) {
        param_grads->layout = model.layout();
        param_grads->values.clear();
        param_grads->values.reserve(model.parameter_count());
        for (std::size_t k = 0; k < model.layer_count(); ++k) {
            const auto& w = weight_grads[k].data();
            param_grads->values.insert(param_grads->values.end(), w.begin(), w.end());
            param_grads->values.insert(param_grads->values.end(), bias_grads[k].begin(), bias_grads[k].end());
        }
    }
    return loss;
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace

std::size_t layout_size(const Layout& layout) noexcept {
    std::size_t n = 0;
    for (const auto& e : layout) n += e.size();
    return n;
}

void require_same_layout(const ParamVector& a, const ParamVector& b) {
    if (a.layout != b.layout || a.values.size() != b.values.size()) {
        throw LayoutError("parameter vectors have different layouts");
    }
}

void validate_batch(const Batch& batch, std::size_t input_dim, std::size_t class_count) {
    if (batch.inputs.rows() != batch.labels.size()) {
        throw ShapeError("batch: " + std::to_string(batch.inputs.rows()) + " input rows but " +
                         std::to_string(batch.labels.size()) + " labels");
    }
    if (batch.inputs.cols() != input_dim) {
        throw ShapeError("batch: input width " + std::to_string(batch.inputs.cols()) + " != " +
                         std::to_string(input_dim));
    }
    for (auto y : batch.labels) {
        if (y >= class_count) throw std::invalid_argument("batch: label " + std::to_string(y) + " out of range");
    }
}

Batch gather(const Batch& batch, std::span<const std::size_t> indices) {
    Batch out;
    out.inputs = gather_rows(batch.inputs, indices);
    out.labels.reserve(indices.size());
    for (auto i : indices) out.labels.push_back(batch.labels[i]);
    return out;
}

MlpModel::MlpModel(std::vector<std::size_t> layer_sizes) : layer_sizes_(std::move(layer_sizes)) {
    if (layer_sizes_.size() < 2) throw ShapeError("MlpModel: need at least input and output sizes");
    for (auto s : layer_sizes_) {
        if (s == 0) throw ShapeError("MlpModel: zero-width layer");
    }
    for (std::size_t k = 0; k + 1 < layer_sizes_.size(); ++k) {
        weights_.emplace_back(layer_sizes_[k + 1], layer_sizes_[k]);
        biases_.emplace_back(layer_sizes_[k + 1], 0.0);
    }
}

MlpModel MlpModel::random(std::vector<std::size_t> layer_sizes, std::uint64_t seed) {
    MlpModel model(std::move(layer_sizes));
    Rng rng(seed);
    for (auto& w : model.weights_) {
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(w.cols())));
        for (double& v : w.data()) v = dist(rng);
    }
    return model;
}

Layout MlpModel::layout() const {
    Layout layout;
    for (std::size_t k = 0; k < weights_.size(); ++k) {
        layout.push_back({k, ParamKind::Weight, weights_[k].rows(), weights_[k].cols()});
        layout.push_back({k, ParamKind::Bias, biases_[k].size(), 1});
    }
    return layout;
}

std::size_t MlpModel::parameter_count() const noexcept {
    std::size_t n = 0;
    for (std::size_t k = 0; k < weights_.size(); ++k) n += weights_[k].size() + biases_[k].size();
    return n;
}

Matrix forward(const MlpModel& model, const Matrix& inputs) {
    return std::move(run_forward(model, inputs).preacts.back());
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const auto row = logits.row(r);
        auto dst = out.row(r);
        const double mx = *std::max_element(row.begin(), row.end());
        double sum = 0.0;
        for (std::size_t c = 0; c < row.size(); ++c) sum += dst[c] = std::exp(row[c] - mx);
        for (double& v : dst) v /= sum;
    }
    return out;
}

LossGrads loss_and_grads(const MlpModel& model, const Batch& batch) {
    LossGrads out;
    out.loss = backprop(model, batch, &out.param_grads, &out.input_grads);
    return out;
}

double loss_and_input_grads(const MlpModel& model, const Batch& batch, Matrix& input_grads) {
    return backprop(model, batch, nullptr, &input_grads);
}

double mean_loss(const MlpModel& model, const Batch& batch) {
    if (batch.empty()) throw std::invalid_argument("mean_loss: empty batch");
    validate_batch(batch, model.input_dim(), model.class_count());
    return softmax_xent(forward(model, batch.inputs), batch.labels, nullptr);
}

ParamVector flatten(const MlpModel& model) {
    ParamVector out;
    out.layout = model.layout();
    out.values.reserve(model.parameter_count());
    for (std::size_t k = 0; k < model.layer_count(); ++k) {
        const auto& w = model.weight(k).data();
        out.values.insert(out.values.end(), w.begin(), w.end());
        out.values.insert(out.values.end(), model.bias(k).begin(), model.bias(k).end());
    }
    return out;
}

MlpModel unflatten(const Layout& layout, std::span<const double> values) {
    if (layout.empty() || layout.size() % 2 != 0) throw LayoutError("unflatten: layout must pair weight/bias entries");
    if (layout_size(layout) != values.size()) {
        throw LayoutError("unflatten: layout expects " + std::to_string(layout_size(layout)) + " values, got " +
                          std::to_string(values.size()));
    }
    std::vector<std::size_t> sizes{layout[0].cols};
    for (std::size_t k = 0; k < layout.size() / 2; ++k) {
        const auto& w = layout[2 * k];
        const auto& b = layout[2 * k + 1];
        if (w.layer != k || b.layer != k || w.kind != ParamKind::Weight || b.kind != ParamKind::Bias ||
            w.cols != sizes.back() || b.rows != w.rows || b.cols != 1) {
            throw LayoutError("unflatten: inconsistent layout at layer " + std::to_string(k));
        }
        sizes.push_back(w.rows);
    }
    MlpModel model(sizes);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < model.layer_count(); ++k) {
        auto& w = model.weight(k).data();
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offset), w.size(), w.begin());
        offset += w.size();
        auto& b = model.bias(k);
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offset), b.size(), b.begin());
        offset += b.size();
    }
    return model;
}

void sgd_step(MlpModel& model, const ParamVector& grads, double lr) {
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("sgd_step: lr must be finite and >= 0");
    if (grads.layout != model.layout() || grads.values.size() != model.parameter_count()) {
        throw LayoutError("sgd_step: gradient layout does not match model");
    }
    for (double g : grads.values) {
        if (!std::isfinite(g)) throw NumericError("sgd_step: non-finite gradient");
    }
    std::size_t offset = 0;
    for (std::size_t k = 0; k < model.layer_count(); ++k) {
        for (double& v : model.weight(k).data()) v -= lr * grads.values[offset++];
        for (double& v : model.bias(k)) v -= lr * grads.values[offset++];
    }
}

std::size_t argmax(std::span<const double> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

std::size_t argmax_excluding(std::span<const double> values, std::size_t exclude) {
    std::size_t best = values.size();
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i == exclude) continue;
        if (best == values.size() || values[i] > values[best]) best = i;
    }
    return best;
}

std::vector<std::size_t> predict(const MlpModel& model, const Matrix& inputs) {
    const Matrix logits = forward(model, inputs);
    std::vector<std::size_t> out(logits.rows());
    for (std::size_t r = 0; r < logits.rows(); ++r) out[r] = argmax(logits.row(r));
    return out;
}

double accuracy(const MlpModel& model, const Batch& batch) {
    if (batch.empty()) throw std::invalid_argument("accuracy: empty batch");
    validate_batch(batch, model.input_dim(), model.class_count());
    const auto preds = predict(model, batch.inputs);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == batch.labels[i];
    return static_cast<double>(hits) / static_cast<double>(preds.size());
}

void write_checkpoint(std::ostream& out, const ParamVector& params) {
    out << kCheckpointHeader << '\n';
    for (const auto& e : params.layout) {
        if (e.kind == ParamKind::Weight) {
            out << "layer " << e.layer << " weight " << e.rows << ' ' << e.cols << '\n';
        } else {
            out << "layer " << e.layer << " bias " << e.rows << '\n';
        }
    }
    for (double v : params.values) out << format_double(v) << '\n';
}

ParamVector read_checkpoint(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kCheckpointHeader) {
        throw FormatError("checkpoint: missing header '" + std::string(kCheckpointHeader) + "'");
    }
    ParamVector params;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line.rfind("layer ", 0) == 0) {
            if (!params.values.empty()) throw FormatError("checkpoint: layout line after values at line " + std::to_string(line_no));
            std::istringstream ls(line);
            std::string tag, kind;
            LayoutEntry e;
            ls >> tag >> e.layer >> kind;
            if (kind == "weight") {
                e.kind = ParamKind::Weight;
                ls >> e.rows >> e.cols;
            } else if (kind == "bias") {
                e.kind = ParamKind::Bias;
                ls >> e.rows;
                e.cols = 1;
            } else {
                throw FormatError("checkpoint: unknown entry kind '" + kind + "' at line " + std::to_string(line_no));
            }
            if (ls.fail()) throw FormatError("checkpoint: malformed layout line " + std::to_string(line_no));
            params.layout.push_back(e);
            continue;
        }
        double v = 0.0;
        const char* first = line.data();
        const char* last = line.data() + line.size();
        auto res = std::from_chars(first, last, v);
        if (res.ec != std::errc{} || res.ptr != last) {
            throw FormatError("checkpoint: bad value at line " + std::to_string(line_no));
        }
        params.values.push_back(v);
    }
    if (params.values.size() != layout_size(params.layout)) {
        throw FormatError("checkpoint: layout expects " + std::to_string(layout_size(params.layout)) +
                          " values, found " + std::to_string(params.values.size()));
    }
    return params;
}

void save_checkpoint(const MlpModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_checkpoint(out, flatten(model));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

MlpModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    try {
        return unflatten(read_checkpoint(in));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace fedarena
