#pragma once

// Dense ReLU classifier with hand-written backprop and flat parameter views.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "fedarena/matrix.hpp"

namespace fedarena {

enum class ParamKind { Weight, Bias };

struct LayoutEntry {
    std::size_t layer = 0;
    ParamKind kind = ParamKind::Weight;
    std::size_t rows = 0;
    std::size_t cols = 1;  // 1 for biases

    std::size_t size() const noexcept { return rows * cols; }
    friend bool operator==(const LayoutEntry&, const LayoutEntry&) = default;
};

using Layout = std::vector<LayoutEntry>;

std::size_t layout_size(const Layout& layout) noexcept;

/// Flat parameter vector: layer 0 weights (row-major), layer 0 bias, layer 1
/// weights, ... This is the unit that clients upload and servers aggregate.
struct ParamVector {
    Layout layout;
    std::vector<double> values;

    std::size_t size() const noexcept { return values.size(); }
    friend bool operator==(const ParamVector&, const ParamVector&) = default;
};

// Throws LayoutError unless both vectors share one layout.
void require_same_layout(const ParamVector& a, const ParamVector& b);

/// Labelled examples. Inputs are n x d in [0,1]; labels are class indices.
struct Batch {
    Matrix inputs;
    std::vector<std::size_t> labels;

    std::size_t size() const noexcept { return labels.size(); }
    bool empty() const noexcept { return labels.empty(); }
};

// Throws ShapeError / std::invalid_argument on inconsistent batches.
void validate_batch(const Batch& batch, std::size_t input_dim, std::size_t class_count);

Batch gather(const Batch& batch, std::span<const std::size_t> indices);

enum class Activation { ReLU };

class MlpModel {
public:
    MlpModel() = default;
    // Zero-initialized model. layer_sizes = {input, hidden..., classes}.
    explicit MlpModel(std::vector<std::size_t> layer_sizes);

    // He-normal weights, zero biases.
    static MlpModel random(std::vector<std::size_t> layer_sizes, std::uint64_t seed);

    const std::vector<std::size_t>& layer_sizes() const noexcept { return layer_sizes_; }
    std::size_t layer_count() const noexcept { return weights_.size(); }
    std::size_t input_dim() const noexcept { return layer_sizes_.front(); }
    std::size_t class_count() const noexcept { return layer_sizes_.back(); }
    Activation activation() const noexcept { return Activation::ReLU; }

    Matrix& weight(std::size_t k) { return weights_.at(k); }
    const Matrix& weight(std::size_t k) const { return weights_.at(k); }
    std::vector<double>& bias(std::size_t k) { return biases_.at(k); }
    const std::vector<double>& bias(std::size_t k) const { return biases_.at(k); }

    Layout layout() const;
    std::size_t parameter_count() const noexcept;

    friend bool operator==(const MlpModel&, const MlpModel&) = default;

private:
    std::vector<std::size_t> layer_sizes_;
    std::vector<Matrix> weights_;
    std::vector<std::vector<double>> biases_;
};

// Logits, n x class_count. ShapeError on input width mismatch.
Matrix forward(const MlpModel& model, const Matrix& inputs);

// Row-wise softmax, computed stably.
Matrix softmax_rows(const Matrix& logits);

struct LossGrads {
    double loss = 0.0;         // mean softmax cross-entropy
    ParamVector param_grads;   // d loss / d theta
    Matrix input_grads;        // d loss / d inputs, same shape as batch.inputs
};

LossGrads loss_and_grads(const MlpModel& model, const Batch& batch);

// Skips the parameter-gradient accumulation; PGD only needs d loss / d x.
// Returns the mean loss and fills `input_grads`.
double loss_and_input_grads(const MlpModel& model, const Batch& batch, Matrix& input_grads);

double mean_loss(const MlpModel& model, const Batch& batch);

ParamVector flatten(const MlpModel& model);
MlpModel unflatten(const Layout& layout, std::span<const double> values);
inline MlpModel unflatten(const ParamVector& params) { return unflatten(params.layout, params.values); }

// theta <- theta - lr * grads. NumericError on non-finite gradients, LayoutError
// on layout mismatch, std::invalid_argument when lr < 0.
void sgd_step(MlpModel& model, const ParamVector& grads, double lr);

// Index of the largest value; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);
// Index of the largest value other than `exclude`; ties go to the lowest index.
std::size_t argmax_excluding(std::span<const double> values, std::size_t exclude);

std::vector<std::size_t> predict(const MlpModel& model, const Matrix& inputs);
double accuracy(const MlpModel& model, const Batch& batch);

// Text checkpoint ("fedarena-model v1"); values in shortest round-trip decimal.
void write_checkpoint(std::ostream& out, const ParamVector& params);
ParamVector read_checkpoint(std::istream& in);
void save_checkpoint(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_checkpoint(const std::filesystem::path& path);

}  // namespace fedarena
