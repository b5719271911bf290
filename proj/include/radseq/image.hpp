#pragma once

#include <array>
#include <string>
#include <vector>

#include "radseq/tensor.hpp"

namespace radseq {

/// Per-channel standardization parameters, computed on the training split
/// only. std must be positive per channel.
struct NormalizationStats {
    std::array<float, 3> mean{0.0f, 0.0f, 0.0f};
    std::array<float, 3> std{1.0f, 1.0f, 1.0f};
    bool operator==(const NormalizationStats&) const = default;
};

/// Decodes a raster file into a channel-major 3xHxW tensor in [0, 1]
/// (value = raw byte / 255). Binary PPM (P6, maxval 255) is the supported
/// codec; malformed headers and truncated payloads raise DataError with the
/// offending byte offset.
Tensor decode_image(const std::string& path);

/// P6 writer, values clamped to [0, 1] and rounded to bytes. Decoding the
/// written file reproduces the rounded tensor exactly.
void save_ppm(const std::string& path, const Tensor& image);

/// Bilinear resize with half-pixel sample centers. Constant images stay
/// constant and outputs never leave the input's [min, max] range.
Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w);

/// (value - mean[c]) / std[c] per channel.
Tensor normalize(const Tensor& image, const NormalizationStats& stats);

/// Per-channel mean and population standard deviation over a set of 3xHxW
/// images. Throws ValidationError if a channel is constant (std would be 0).
NormalizationStats compute_normalization_stats(const std::vector<Tensor>& images);

}  // namespace radseq
