#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "fedarena/matrix.hpp"
#include "fedarena/model.hpp"

namespace fedarena {

struct Dataset {
    Matrix inputs;                     // n x d, entries in [0,1]
    std::vector<std::size_t> labels;
    std::size_t class_count = 0;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t dim() const noexcept { return inputs.cols(); }
    Batch batch() const { return {inputs, labels}; }
    Batch subset(std::span<const std::size_t> indices) const;
    // std::invalid_argument / ShapeError on broken invariants.
    void validate() const;
};

/// Disjoint cover of {0..n-1}, one index list per client.
struct Partition {
    std::vector<std::vector<std::size_t>> client_indices;

    std::size_t client_count() const noexcept { return client_indices.size(); }
    // Throws std::logic_error unless the lists are disjoint, cover 0..n-1 and nonempty.
    void check(std::size_t n) const;
};

// IDX (MNIST) pair: images magic 0x00000803 [n rows cols] u8 pixels,
// labels magic 0x00000801 [n] u8. Pixels are scaled by 1/255.
// FormatError messages name the file and byte offset.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

// Writes round(255 * x) pixels; image shape rows x cols must equal dim.
void write_idx(const Dataset& data, std::size_t rows, std::size_t cols, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path);

// Gaussian blobs around class centers drawn uniformly in [0.2, 0.8]^dim,
// clamped to [0,1]. Examples are ordered class by class.
Dataset synth_blobs(std::size_t class_count, std::size_t dim, std::size_t per_class, double spread,
                    std::uint64_t seed);

// Per class: client shares ~ Dirichlet(concentration), counts by largest
// remainder. Empty clients then take one example from the largest client.
Partition dirichlet_partition(const Dataset& data, std::size_t n_clients, double concentration, std::uint64_t seed);

// Seeded shuffle, then the first round(test_fraction * n) indices go to test.
// Keeps at least one training example.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> train_test_split(std::span<const std::size_t> indices,
                                                                               double test_fraction,
                                                                               std::uint64_t seed);

}  // namespace fedarena
