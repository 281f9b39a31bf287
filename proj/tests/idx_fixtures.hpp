#pragma once

// Handcrafted IDX byte fixtures shared by the data tests and the acceptance suite.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace fixtures {

using Bytes = std::vector<std::uint8_t>;

// Two 2x2 images: pixels 0,255,51,102 and 204,0,255,153; labels 3 and 7.
inline const Bytes kImages{0x00, 0x00, 0x08, 0x03, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2,
                           0,    255,  51,   102,  204, 0, 255, 153};
inline const Bytes kLabels{0x00, 0x00, 0x08, 0x01, 0, 0, 0, 2, 3, 7};

inline const std::vector<double> kExpectedInputs{0.0, 1.0, 0.2, 0.4, 0.8, 0.0, 1.0, 0.6};
inline const std::vector<std::size_t> kExpectedLabels{3, 7};

inline Bytes with_byte(Bytes b, std::size_t at, std::uint8_t v) {
    b[at] = v;
    return b;
}

inline Bytes truncated(Bytes b, std::size_t keep) {
    b.resize(keep);
    return b;
}

// Labels file declaring three labels against two images.
inline const Bytes kLabelsCountMismatch{0x00, 0x00, 0x08, 0x01, 0, 0, 0, 3, 3, 7, 1};

inline std::filesystem::path write(const std::filesystem::path& dir, const std::string& name, const Bytes& b) {
    std::filesystem::create_directories(dir);
    const auto path = dir / name;
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
    return path;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("fedarena-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace fixtures
