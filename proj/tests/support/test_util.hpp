#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "radseq/dataset.hpp"
#include "radseq/image.hpp"
#include "radseq/rng.hpp"
#include "radseq/tensor.hpp"

namespace radseq::testutil {

/// Unique scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::uint64_t counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("radseq_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

/// Smooth low-frequency field: the "benign" texture class.
inline Tensor smooth_texture(std::size_t size, Rng& rng) {
    Tensor img(Shape{3, size, size});
    const double fx = rng.uniform(0.5, 1.5);
    const double fy = rng.uniform(0.5, 1.5);
    const double phase = rng.uniform(0.0, 6.28318);
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t y = 0; y < size; ++y) {
            for (std::size_t x = 0; x < size; ++x) {
                const double wave = std::sin(
                    6.28318 * (fx * static_cast<double>(x) + fy * static_cast<double>(y)) /
                        static_cast<double>(size) +
                    phase);
                const double v = 0.5 + 0.35 * wave + rng.uniform(-0.05, 0.05);
                img(c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        }
    }
    return img;
}

/// High-frequency checkerboard: the "malignant" texture class.
inline Tensor checker_texture(std::size_t size, Rng& rng) {
    Tensor img(Shape{3, size, size});
    const std::size_t period = 3 + rng.below(3);  // 3..5 pixels
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t y = 0; y < size; ++y) {
            for (std::size_t x = 0; x < size; ++x) {
                const bool on = ((x / period) + (y / period)) % 2 == 0;
                const double v = 0.5 + (on ? 0.35 : -0.35) + rng.uniform(-0.05, 0.05);
                img(c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        }
    }
    return img;
}

/// Writes benign_count + malignant_count texture PPMs into dir and returns a
/// manifest listing them (benign records first, in file order).
inline DatasetManifest make_texture_dataset(const TempDir& dir, std::size_t benign_count,
                                            std::size_t malignant_count, std::size_t size,
                                            std::uint64_t seed) {
    Rng rng(seed);
    DatasetManifest manifest;
    manifest.provenance = "synthetic textures";
    for (std::size_t i = 0; i < benign_count; ++i) {
        const std::string path = dir.file("benign_" + std::to_string(i) + ".ppm");
        save_ppm(path, smooth_texture(size, rng));
        manifest.records.push_back({path, kBenign});
    }
    for (std::size_t i = 0; i < malignant_count; ++i) {
        const std::string path = dir.file("malignant_" + std::to_string(i) + ".ppm");
        save_ppm(path, checker_texture(size, rng));
        manifest.records.push_back({path, kMalignant});
    }
    return manifest;
}

}  // namespace radseq::testutil
