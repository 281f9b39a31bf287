#include "fedarena/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "fedarena/errors.hpp"
#include "fedarena/rng.hpp"

namespace fedarena {
namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

class IdxReader {
public:
    explicit IdxReader(const std::filesystem::path& path) : path_(path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw FormatError(path.string() + ": cannot open");
        bytes_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 8) | static_cast<std::uint8_t>(bytes_[offset_++]);
        return v;
    }

    std::span<const char> take(std::size_t n) {
        need(n);
        std::span<const char> out(bytes_.data() + offset_, n);
        offset_ += n;
        return out;
    }

    std::size_t offset() const noexcept { return offset_; }

    [[noreturn]] void fail(const std::string& what, std::size_t at) const {
        throw FormatError(path_.string() + ": " + what + " at offset " + std::to_string(at));
    }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - offset_ < n) {
            fail("truncated file (need " + std::to_string(n) + " bytes, have " +
                     std::to_string(bytes_.size() - offset_) + ")",
                 offset_);
        }
    }

    std::filesystem::path path_;
    std::vector<char> bytes_;
    std::size_t offset_ = 0;
};

void put_u32(std::ofstream& out, std::uint32_t v) {
    const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                       static_cast<char>(v)};
    out.write(b, 4);
}

}  // namespace

Batch Dataset::subset(std::span<const std::size_t> indices) const { return gather(batch(), indices); }

void Dataset::validate() const {
    if (inputs.rows() != labels.size()) throw ShapeError("dataset: inputs/labels row count mismatch");
    for (auto y : labels) {
        if (y >= class_count) throw std::invalid_argument("dataset: label out of range");
    }
    for (double v : inputs.data()) {
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("dataset: input outside [0,1]");
    }
}

void Partition::check(std::size_t n) const {
    std::vector<char> seen(n, 0);
    std::size_t total = 0;
    for (const auto& idx : client_indices) {
        if (idx.empty()) throw std::logic_error("partition: empty client");
        for (auto i : idx) {
            if (i >= n || seen[i]) throw std::logic_error("partition: index out of range or duplicated");
            seen[i] = 1;
            ++total;
        }
    }
    if (total != n) throw std::logic_error("partition: indices do not cover the dataset");
}

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
    IdxReader img(images_path);
    if (img.u32() != kImagesMagic) img.fail("bad images magic (expected 0x00000803)", 0);
    const std::uint32_t n = img.u32();
    const std::uint32_t rows = img.u32();
    const std::uint32_t cols = img.u32();
    const std::size_t d = static_cast<std::size_t>(rows) * cols;

    IdxReader lab(labels_path);
    if (lab.u32() != kLabelsMagic) lab.fail("bad labels magic (expected 0x00000801)", 0);
    const std::uint32_t n_labels = lab.u32();
    if (n_labels != n) {
        lab.fail("label count " + std::to_string(n_labels) + " != image count " + std::to_string(n), 4);
    }

    Dataset data;
    data.inputs = Matrix(n, d);
    const auto pixels = img.take(static_cast<std::size_t>(n) * d);
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        data.inputs.data()[i] = static_cast<double>(static_cast<std::uint8_t>(pixels[i])) / 255.0;
    }
    const auto label_bytes = lab.take(n);
    data.labels.resize(n);
    std::size_t max_label = 0;
    for (std::size_t i = 0; i < n; ++i) {
        data.labels[i] = static_cast<std::uint8_t>(label_bytes[i]);
        max_label = std::max(max_label, data.labels[i]);
    }
    data.class_count = n ? max_label + 1 : 0;
    return data;
}

void write_idx(const Dataset& data, std::size_t rows, std::size_t cols, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path) {
    if (rows * cols != data.dim()) throw ShapeError("write_idx: rows*cols != dataset dim");
    std::ofstream img(images_path, std::ios::binary);
    std::ofstream lab(labels_path, std::ios::binary);
    if (!img || !lab) throw std::runtime_error("write_idx: cannot open output files");
    const auto n = static_cast<std::uint32_t>(data.size());
    put_u32(img, kImagesMagic);
    put_u32(img, n);
    put_u32(img, static_cast<std::uint32_t>(rows));
    put_u32(img, static_cast<std::uint32_t>(cols));
    for (double v : data.inputs.data()) {
        img.put(static_cast<char>(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
    }
    put_u32(lab, kLabelsMagic);
    put_u32(lab, n);
    for (auto y : data.labels) {
        if (y > 255) throw std::invalid_argument("write_idx: label does not fit in a byte");
        lab.put(static_cast<char>(y));
    }
    if (!img || !lab) throw std::runtime_error("write_idx: write failed");
}

Dataset synth_blobs(std::size_t class_count, std::size_t dim, std::size_t per_class, double spread,
                    std::uint64_t seed) {
    if (class_count < 1 || dim < 1 || per_class < 1) throw std::invalid_argument("synth_blobs: counts must be >= 1");
    if (!(spread >= 0.0)) throw std::invalid_argument("synth_blobs: spread must be >= 0");
    Rng rng(seed);
    std::uniform_real_distribution<double> center_dist(0.2, 0.8);
    Matrix centers(class_count, dim);
    for (double& v : centers.data()) v = center_dist(rng);

    Dataset data;
    data.class_count = class_count;
    data.inputs = Matrix(class_count * per_class, dim);
    data.labels.resize(class_count * per_class);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::size_t r = 0;
    for (std::size_t c = 0; c < class_count; ++c) {
        for (std::size_t i = 0; i < per_class; ++i, ++r) {
            auto row = data.inputs.row(r);
            for (std::size_t j = 0; j < dim; ++j) row[j] = std::clamp(centers(c, j) + spread * noise(rng), 0.0, 1.0);
            data.labels[r] = c;
        }
    }
    return data;
}

Partition dirichlet_partition(const Dataset& data, std::size_t n_clients, double concentration, std::uint64_t seed) {
    if (n_clients < 1) throw std::invalid_argument("dirichlet_partition: need at least one client");
    if (!(concentration > 0.0)) throw std::invalid_argument("dirichlet_partition: concentration must be > 0");
    if (n_clients > data.size()) {
        throw std::invalid_argument("dirichlet_partition: " + std::to_string(n_clients) + " clients but only " +
                                    std::to_string(data.size()) + " examples");
    }
    Rng rng(seed);
    std::vector<std::vector<std::size_t>> by_class(data.class_count);
    for (std::size_t i = 0; i < data.size(); ++i) by_class[data.labels[i]].push_back(i);

    Partition part;
    part.client_indices.resize(n_clients);
    std::gamma_distribution<double> gamma(concentration, 1.0);
    std::vector<double> share(n_clients);
    for (auto& members : by_class) {
        if (members.empty()) continue;
        std::shuffle(members.begin(), members.end(), rng);
        double total = 0.0;
        for (double& s : share) total += s = gamma(rng);
        if (!(total > 0.0)) {
            std::fill(share.begin(), share.end(), 1.0);
            total = static_cast<double>(n_clients);
        }
        // Largest-remainder apportionment of members.size() examples.
        const auto count = static_cast<double>(members.size());
        std::vector<std::size_t> alloc(n_clients);
        std::vector<double> remainder(n_clients);
        std::size_t assigned = 0;
        for (std::size_t c = 0; c < n_clients; ++c) {
            const double exact = share[c] / total * count;
            alloc[c] = static_cast<std::size_t>(std::floor(exact));
            remainder[c] = exact - static_cast<double>(alloc[c]);
            assigned += alloc[c];
        }
        std::vector<std::size_t> order(n_clients);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
        for (std::size_t i = 0; assigned < members.size(); ++i, ++assigned) ++alloc[order[i % n_clients]];

        std::size_t pos = 0;
        for (std::size_t c = 0; c < n_clients; ++c) {
            auto& dst = part.client_indices[c];
            dst.insert(dst.end(), members.begin() + static_cast<std::ptrdiff_t>(pos),
                       members.begin() + static_cast<std::ptrdiff_t>(pos + alloc[c]));
            pos += alloc[c];
        }
    }

    for (auto& idx : part.client_indices) {
        if (!idx.empty()) continue;
        auto largest = std::max_element(part.client_indices.begin(), part.client_indices.end(),
                                        [](const auto& a, const auto& b) { return a.size() < b.size(); });
        idx.push_back(largest->back());
        largest->pop_back();
    }
    for (auto& idx : part.client_indices) std::sort(idx.begin(), idx.end());
    return part;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> train_test_split(std::span<const std::size_t> indices,
                                                                               double test_fraction,
                                                                               std::uint64_t seed) {
    if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
        throw std::invalid_argument("train_test_split: test_fraction must be in [0,1)");
    }
    std::vector<std::size_t> shuffled(indices.begin(), indices.end());
    Rng rng(seed);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(shuffled.size())));
    if (!shuffled.empty() && n_test >= shuffled.size()) n_test = shuffled.size() - 1;
    std::vector<std::size_t> test(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::vector<std::size_t> train(shuffled.begin() + static_cast<std::ptrdiff_t>(n_test), shuffled.end());
    return {std::move(train), std::move(test)};
}

}  // namespace fedarena
