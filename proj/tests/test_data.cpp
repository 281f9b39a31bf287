#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "fedarena/data.hpp"
#include "fedarena/errors.hpp"
#include "fedarena/training.hpp"
#include "idx_fixtures.hpp"

using namespace fedarena;

TEST_CASE("handcrafted IDX pair parses to known values") {
    const auto dir = fixtures::scratch_dir("test-data-good");
    const Dataset d = load_idx(fixtures::write(dir, "img", fixtures::kImages), fixtures::write(dir, "lab", fixtures::kLabels));
    CHECK(d.size() == 2);
    CHECK(d.dim() == 4);
    CHECK(d.labels == fixtures::kExpectedLabels);
    CHECK(d.class_count == 8);
    for (std::size_t i = 0; i < 8; ++i) CHECK(d.inputs.data()[i] == doctest::Approx(fixtures::kExpectedInputs[i]).epsilon(1e-15));
    CHECK(d.inputs(0, 1) == 1.0);  // byte 255 maps to exactly 1
}

TEST_CASE("corrupted IDX files produce format errors with offsets") {
    const auto dir = fixtures::scratch_dir("test-data-bad");
    const auto img = fixtures::write(dir, "img", fixtures::kImages);
    const auto lab = fixtures::write(dir, "lab", fixtures::kLabels);
    const auto bad_img = fixtures::write(dir, "bad_img", fixtures::with_byte(fixtures::kImages, 3, 0x02));
    const auto bad_lab = fixtures::write(dir, "bad_lab", fixtures::with_byte(fixtures::kLabels, 2, 0x09));
    const auto mismatch = fixtures::write(dir, "mismatch", fixtures::kLabelsCountMismatch);
    const auto short_img = fixtures::write(dir, "short_img", fixtures::truncated(fixtures::kImages, 20));
    const auto short_lab = fixtures::write(dir, "short_lab", fixtures::truncated(fixtures::kLabels, 9));
    const auto tiny = fixtures::write(dir, "tiny", fixtures::truncated(fixtures::kImages, 2));

    CHECK_THROWS_WITH_AS(load_idx(bad_img, lab), doctest::Contains("magic"), FormatError);
    CHECK_THROWS_WITH_AS(load_idx(bad_img, lab), doctest::Contains("offset 0"), FormatError);
    CHECK_THROWS_WITH_AS(load_idx(img, bad_lab), doctest::Contains("magic"), FormatError);
    CHECK_THROWS_WITH_AS(load_idx(img, mismatch), doctest::Contains("offset 4"), FormatError);
    CHECK_THROWS_WITH_AS(load_idx(short_img, lab), doctest::Contains("truncated"), FormatError);
    CHECK_THROWS_WITH_AS(load_idx(short_img, lab), doctest::Contains("offset 16"), FormatError);
    CHECK_THROWS_WITH_AS(load_idx(img, short_lab), doctest::Contains("offset 8"), FormatError);
    CHECK_THROWS_WITH_AS(load_idx(tiny, lab), doctest::Contains("offset 0"), FormatError);
    CHECK_THROWS_AS(load_idx(dir / "missing", lab), FormatError);
}

TEST_CASE("IDX write/load round-trips") {
    const auto dir = fixtures::scratch_dir("test-data-roundtrip");
    Dataset d;
    d.inputs = Matrix(3, 6);
    for (std::size_t i = 0; i < d.inputs.size(); ++i) d.inputs.data()[i] = static_cast<double>((i * 37) % 256) / 255.0;
    d.labels = {0, 4, 2};
    d.class_count = 5;
    write_idx(d, 2, 3, dir / "img", dir / "lab");
    const Dataset back = load_idx(dir / "img", dir / "lab");
    CHECK(back.inputs == d.inputs);
    CHECK(back.labels == d.labels);
}

TEST_CASE("synthetic blobs are seeded and bounded") {
    const Dataset a = synth_blobs(4, 8, 25, 0.2, 3);
    CHECK(a.size() == 100);
    CHECK(a.class_count == 4);
    CHECK_NOTHROW(a.validate());
    const Dataset b = synth_blobs(4, 8, 25, 0.2, 3);
    CHECK(a.inputs == b.inputs);
    CHECK(a.labels == b.labels);
    CHECK_FALSE(synth_blobs(4, 8, 25, 0.2, 4).inputs == a.inputs);
}

TEST_CASE("vanishing spread collapses each class onto its center") {
    const Dataset d = synth_blobs(5, 6, 10, 1e-12, 8);
    std::vector<std::vector<double>> centers(5);
    for (std::size_t i = 0; i < d.size(); ++i) {
        auto& c = centers[d.labels[i]];
        if (c.empty()) c.assign(d.inputs.row(i).begin(), d.inputs.row(i).end());
        for (std::size_t j = 0; j < d.dim(); ++j) {
            CHECK(std::abs(d.inputs(i, j) - c[j]) < 1e-9);
            CHECK(c[j] >= 0.2 - 1e-9);
            CHECK(c[j] <= 0.8 + 1e-9);
        }
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        std::size_t best = 0;
        double best_dist = INFINITY;
        for (std::size_t k = 0; k < 5; ++k) {
            double dist = 0;
            for (std::size_t j = 0; j < d.dim(); ++j) dist += std::pow(d.inputs(i, j) - centers[k][j], 2);
            if (dist < best_dist) best_dist = dist, best = k;
        }
        hits += best == d.labels[i];
    }
    CHECK(hits == d.size());
}

TEST_CASE("a linear model fits default blobs") {
    const Dataset train = synth_blobs(10, 32, 100, 0.2, 5);
    const Dataset test = synth_blobs(10, 32, 30, 0.2, 5);
    LocalTrainConfig cfg;
    cfg.epochs = 10;
    cfg.batch_size = 16;
    const MlpModel m = local_train(MlpModel({32, 10}), train.batch(), cfg, 1);
    CHECK(accuracy(m, test.batch()) > 0.9);
}

TEST_CASE("dirichlet partition invariants") {
    const Dataset d = synth_blobs(10, 4, 50, 0.2, 2);
    for (double alpha : {0.05, 0.3, 1.0, 100.0}) {
        for (std::size_t clients : {1u, 7u, 40u}) {
            const Partition p = dirichlet_partition(d, clients, alpha, 11);
            CHECK(p.client_count() == clients);
            CHECK_NOTHROW(p.check(d.size()));
        }
    }
    const Partition one = dirichlet_partition(d, 1, 0.4, 1);
    std::vector<std::size_t> all(d.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    CHECK(one.client_indices[0] == all);
    CHECK_THROWS_AS(dirichlet_partition(d, d.size() + 1, 0.4, 1), std::invalid_argument);
    CHECK_THROWS_AS(dirichlet_partition(d, 3, 0.0, 1), std::invalid_argument);
}

TEST_CASE("dirichlet partition: iid limit and skewed regime") {
    const Dataset d = synth_blobs(4, 4, 500, 0.2, 2);
    const Partition iid = dirichlet_partition(d, 5, 1e6, 3);
    for (const auto& idx : iid.client_indices) {
        std::vector<double> hist(4, 0.0);
        for (auto i : idx) hist[d.labels[i]] += 1.0;
        for (double h : hist) CHECK(std::abs(h / static_cast<double>(idx.size()) - 0.25) <= 0.025);
    }

    const Dataset ten = synth_blobs(10, 4, 50, 0.2, 2);
    const Partition skew = dirichlet_partition(ten, 10, 0.3, 5);
    CHECK_NOTHROW(skew.check(ten.size()));
    bool dominant = false;
    for (const auto& idx : skew.client_indices) {
        std::vector<std::size_t> hist(10, 0);
        for (auto i : idx) ++hist[ten.labels[i]];
        dominant |= 2 * *std::max_element(hist.begin(), hist.end()) > idx.size();
    }
    CHECK(dominant);
}

TEST_CASE("train/test split keeps indices disjoint") {
    std::vector<std::size_t> idx{4, 9, 12, 15, 20};
    const auto [train, test] = train_test_split(idx, 0.2, 7);
    CHECK(train.size() == 4);
    CHECK(test.size() == 1);
    std::set<std::size_t> seen(train.begin(), train.end());
    seen.insert(test.begin(), test.end());
    CHECK(seen == std::set<std::size_t>(idx.begin(), idx.end()));
    std::vector<std::size_t> single{3};
    CHECK(train_test_split(single, 0.5, 1).first == single);
}
