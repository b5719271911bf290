#include "radseq/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>

namespace radseq {

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) throw DataError("read failed for '" + path + "'");
    return bytes;
}

struct PpmHeaderReader {
    const std::vector<std::uint8_t>& bytes;
    const std::string& path;
    std::size_t pos = 0;

    [[noreturn]] void fail(const std::string& detail) const {
        throw DataError("'" + path + "': " + detail + " at byte offset " + std::to_string(pos));
    }

    bool at_end() const { return pos >= bytes.size(); }
    std::uint8_t peek() const { return bytes[pos]; }

    static bool is_space(std::uint8_t c) {
        return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f';
    }

    // Whitespace and '#' comments are interchangeable separators in the header.
    void skip_separators() {
        while (!at_end()) {
            if (is_space(peek())) {
                ++pos;
            } else if (peek() == '#') {
                while (!at_end() && peek() != '\n') ++pos;
            } else {
                return;
            }
        }
    }

    std::size_t read_number(const char* what) {
        skip_separators();
        if (at_end()) fail(std::string("truncated header, expected ") + what);
        if (peek() < '0' || peek() > '9') {
            fail(std::string("expected a decimal ") + what);
        }
        std::size_t v = 0;
        while (!at_end() && peek() >= '0' && peek() <= '9') {
            v = v * 10 + (peek() - '0');
            if (v > std::numeric_limits<std::uint32_t>::max()) fail("header value overflows");
            ++pos;
        }
        return v;
    }
};

}  // namespace

Tensor decode_image(const std::string& path) {
    const std::vector<std::uint8_t> bytes = read_file(path);
    PpmHeaderReader r{bytes, path};

    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
        throw DataError("'" + path + "': unsupported image format (expected binary PPM magic P6)");
    }
    r.pos = 2;
    const std::size_t width = r.read_number("width");
    const std::size_t height = r.read_number("height");
    const std::size_t maxval = r.read_number("maxval");
    if (width == 0 || height == 0) r.fail("image extents must be positive");
    if (maxval != 255) r.fail("only 8-bit images (maxval 255) are supported, got " +
                              std::to_string(maxval));
    if (r.at_end() || !PpmHeaderReader::is_space(r.peek())) {
        r.fail("expected a single whitespace byte after maxval");
    }
    ++r.pos;

    const std::size_t expected = width * height * 3;
    if (bytes.size() - r.pos < expected) {
        throw DataError("'" + path + "': truncated pixel payload, need " +
                        std::to_string(expected) + " bytes from offset " + std::to_string(r.pos) +
                        " but file ends at " + std::to_string(bytes.size()));
    }

    Tensor image(Shape{3, height, width});
    const std::uint8_t* px = bytes.data() + r.pos;
    float* out = image.data();
    const std::size_t plane = height * width;
    for (std::size_t i = 0; i < plane; ++i) {
        out[i] = static_cast<float>(px[i * 3]) / 255.0f;
        out[plane + i] = static_cast<float>(px[i * 3 + 1]) / 255.0f;
        out[2 * plane + i] = static_cast<float>(px[i * 3 + 2]) / 255.0f;
    }
    return image;
}

void save_ppm(const std::string& path, const Tensor& image) {
    if (image.rank() != 3 || image.extent(0) != 3) {
        throw DimensionError("save_ppm: image must be 3xHxW, got " + shape_string(image.shape()));
    }
    const std::size_t h = image.extent(1);
    const std::size_t w = image.extent(2);
    const std::size_t plane = h * w;

    std::vector<std::uint8_t> payload(plane * 3);
    const float* in = image.data();
    for (std::size_t i = 0; i < plane; ++i) {
        for (std::size_t c = 0; c < 3; ++c) {
            const float v = std::clamp(in[c * plane + i], 0.0f, 1.0f);
            payload[i * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
        }
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << "P6\n" << w << " " << h << "\n255\n";
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size()));
    if (!out) throw DataError("write failed for '" + path + "'");
}

Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w) {
    if (image.rank() != 3) {
        throw DimensionError("resize_bilinear: image must be CxHxW, got " +
                             shape_string(image.shape()));
    }
    if (out_h == 0 || out_w == 0) {
        throw ValidationError("resize_bilinear: target extents must be positive");
    }
    const std::size_t channels = image.extent(0);
    const std::size_t h = image.extent(1);
    const std::size_t w = image.extent(2);

    float lo = image[0];
    float hi = image[0];
    for (float v : image.values()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }

    // Half-pixel centers: src = (dst + 0.5) * in/out - 0.5, clamped.
    std::vector<std::size_t> y0(out_h), y1(out_h);
    std::vector<float> fy(out_h);
    const double sy_scale = static_cast<double>(h) / static_cast<double>(out_h);
    for (std::size_t oy = 0; oy < out_h; ++oy) {
        double sy = (static_cast<double>(oy) + 0.5) * sy_scale - 0.5;
        sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
        y0[oy] = static_cast<std::size_t>(sy);
        y1[oy] = std::min(y0[oy] + 1, h - 1);
        fy[oy] = static_cast<float>(sy - static_cast<double>(y0[oy]));
    }
    std::vector<std::size_t> x0(out_w), x1(out_w);
    std::vector<float> fx(out_w);
    const double sx_scale = static_cast<double>(w) / static_cast<double>(out_w);
    for (std::size_t ox = 0; ox < out_w; ++ox) {
        double sx = (static_cast<double>(ox) + 0.5) * sx_scale - 0.5;
        sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
        x0[ox] = static_cast<std::size_t>(sx);
        x1[ox] = std::min(x0[ox] + 1, w - 1);
        fx[ox] = static_cast<float>(sx - static_cast<double>(x0[ox]));
    }

    Tensor out(Shape{channels, out_h, out_w});
    for (std::size_t c = 0; c < channels; ++c) {
        const float* plane = image.data() + c * h * w;
        float* out_plane = out.data() + c * out_h * out_w;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
            const float* row0 = plane + y0[oy] * w;
            const float* row1 = plane + y1[oy] * w;
            const float t = fy[oy];
            float* out_row = out_plane + oy * out_w;
            for (std::size_t ox = 0; ox < out_w; ++ox) {
                const float s = fx[ox];
                const float top = row0[x0[ox]] + s * (row0[x1[ox]] - row0[x0[ox]]);
                const float bot = row1[x0[ox]] + s * (row1[x1[ox]] - row1[x0[ox]]);
                out_row[ox] = std::clamp(top + t * (bot - top), lo, hi);
            }
        }
    }
    return out;
}

Tensor normalize(const Tensor& image, const NormalizationStats& stats) {
    if (image.rank() != 3 || image.extent(0) != 3) {
        throw DimensionError("normalize: image must be 3xHxW, got " + shape_string(image.shape()));
    }
    for (std::size_t c = 0; c < 3; ++c) {
        if (!(stats.std[c] > 0.0f)) {
            throw ValidationError("normalize: channel " + std::to_string(c) +
                                  " has non-positive std " + std::to_string(stats.std[c]));
        }
    }
    Tensor out(image.shape());
    const std::size_t plane = image.extent(1) * image.extent(2);
    for (std::size_t c = 0; c < 3; ++c) {
        const float* in = image.data() + c * plane;
        float* o = out.data() + c * plane;
        const float mean = stats.mean[c];
        const float inv_std = 1.0f / stats.std[c];
        for (std::size_t i = 0; i < plane; ++i) o[i] = (in[i] - mean) * inv_std;
    }
    return out;
}

NormalizationStats compute_normalization_stats(const std::vector<Tensor>& images) {
    if (images.empty()) {
        throw ValidationError("compute_normalization_stats: no images");
    }
    std::array<double, 3> sum{0, 0, 0};
    std::array<std::size_t, 3> count{0, 0, 0};
    for (const Tensor& img : images) {
        if (img.rank() != 3 || img.extent(0) != 3) {
            throw DimensionError("compute_normalization_stats: images must be 3xHxW, got " +
                                 shape_string(img.shape()));
        }
        const std::size_t plane = img.extent(1) * img.extent(2);
        for (std::size_t c = 0; c < 3; ++c) {
            const float* in = img.data() + c * plane;
            for (std::size_t i = 0; i < plane; ++i) sum[c] += in[i];
            count[c] += plane;
        }
    }
    std::array<double, 3> mean;
    for (std::size_t c = 0; c < 3; ++c) mean[c] = sum[c] / static_cast<double>(count[c]);

    std::array<double, 3> sq{0, 0, 0};
    for (const Tensor& img : images) {
        const std::size_t plane = img.extent(1) * img.extent(2);
        for (std::size_t c = 0; c < 3; ++c) {
            const float* in = img.data() + c * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                const double d = in[i] - mean[c];
                sq[c] += d * d;
            }
        }
    }

    NormalizationStats stats;
    for (std::size_t c = 0; c < 3; ++c) {
        const double var = sq[c] / static_cast<double>(count[c]);
        const double sd = std::sqrt(var);
        if (!(sd > 0.0)) {
            throw ValidationError("compute_normalization_stats: channel " + std::to_string(c) +
                                  " is constant across the training split");
        }
        stats.mean[c] = static_cast<float>(mean[c]);
        stats.std[c] = static_cast<float>(sd);
    }
    return stats;
}

}  // namespace radseq
