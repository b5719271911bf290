#include "radseq/nn_ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace radseq {

namespace {

using diff_t = std::ptrdiff_t;

struct SpatialDims {
    std::size_t batch = 1;
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    bool batched = false;
};

SpatialDims spatial_dims(const Shape& shape, const char* op) {
    if (shape.size() != 3 && shape.size() != 4) {
        throw DimensionError(std::string(op) + ": input must be CxHxW or NxCxHxW, got " +
                             shape_string(shape));
    }
    SpatialDims d;
    d.batched = shape.size() == 4;
    const std::size_t k = d.batched ? 1 : 0;
    if (d.batched) d.batch = shape[0];
    d.channels = shape[k];
    d.height = shape[k + 1];
    d.width = shape[k + 2];
    return d;
}

// Output positions o (0 <= o < out) whose tap o*stride + k - pad lands inside
// [0, in). Empty when hi < lo.
struct TapRange {
    diff_t lo = 0;
    diff_t hi = -1;
};

TapRange tap_range(std::size_t k, std::size_t in, std::size_t out, std::size_t stride,
                   std::size_t pad) {
    const diff_t s = static_cast<diff_t>(stride);
    const diff_t shift = static_cast<diff_t>(k) - static_cast<diff_t>(pad);
    TapRange r;
    r.lo = shift >= 0 ? 0 : (-shift + s - 1) / s;
    const diff_t top = static_cast<diff_t>(in) - 1 - shift;
    r.hi = top < 0 ? -1 : std::min<diff_t>(static_cast<diff_t>(out) - 1, top / s);
    return r;
}

void check_conv_args(const SpatialDims& d, const Shape& weights, const ConvParams& p,
                     const char* op) {
    if (weights.size() != 4 || weights[0] != p.out_channels || weights[1] != p.in_channels ||
        weights[2] != p.kernel_h || weights[3] != p.kernel_w) {
        throw DimensionError(std::string(op) + ": weights " + shape_string(weights) +
                             " do not match params " +
                             shape_string({p.out_channels, p.in_channels, p.kernel_h, p.kernel_w}));
    }
    if (d.channels != p.in_channels) {
        throw DimensionError(std::string(op) + ": input has " + std::to_string(d.channels) +
                             " channels, params expect " + std::to_string(p.in_channels));
    }
}

}  // namespace

std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                            std::size_t pad) {
    if (stride == 0) throw DimensionError("stride must be positive");
    if (kernel == 0) throw DimensionError("kernel extent must be positive");
    const std::size_t padded = in + 2 * pad;
    if (kernel > padded) {
        throw DimensionError("kernel extent " + std::to_string(kernel) +
                             " exceeds padded input extent " + std::to_string(padded));
    }
    return (padded - kernel) / stride + 1;
}

template <typename T>
TensorT<T> conv2d_forward(const TensorT<T>& input, const TensorT<T>& weights,
                          const TensorT<T>& bias, const ConvParams& p) {
    const SpatialDims d = spatial_dims(input.shape(), "conv2d");
    check_conv_args(d, weights.shape(), p, "conv2d");
    if (bias.rank() != 1 || bias.extent(0) != p.out_channels) {
        throw DimensionError("conv2d: bias " + shape_string(bias.shape()) +
                             " must have extent " + std::to_string(p.out_channels));
    }
    const std::size_t oh = conv_out_extent(d.height, p.kernel_h, p.stride, p.pad);
    const std::size_t ow = conv_out_extent(d.width, p.kernel_w, p.stride, p.pad);

    TensorT<T> out(d.batched ? Shape{d.batch, p.out_channels, oh, ow}
                             : Shape{p.out_channels, oh, ow});

    const T* in_base = input.data();
    const T* w_base = weights.data();
    const T* b = bias.data();
    T* out_base = out.data();

    const std::size_t in_plane = d.height * d.width;
    const std::size_t in_sample = d.channels * in_plane;
    const std::size_t out_plane = oh * ow;
    const std::size_t out_sample = p.out_channels * out_plane;
    const std::size_t w_plane = p.kernel_h * p.kernel_w;
    const std::size_t w_filter = p.in_channels * w_plane;
    const diff_t stride = static_cast<diff_t>(p.stride);
    const diff_t width = static_cast<diff_t>(d.width);

    for (std::size_t n = 0; n < d.batch; ++n) {
        for (std::size_t co = 0; co < p.out_channels; ++co) {
            T* out_p = out_base + n * out_sample + co * out_plane;
            std::fill(out_p, out_p + out_plane, b[co]);
            for (std::size_t ci = 0; ci < p.in_channels; ++ci) {
                const T* in_p = in_base + n * in_sample + ci * in_plane;
                const T* w_p = w_base + co * w_filter + ci * w_plane;
                for (std::size_t ky = 0; ky < p.kernel_h; ++ky) {
                    const TapRange ry = tap_range(ky, d.height, oh, p.stride, p.pad);
                    if (ry.hi < ry.lo) continue;
                    const diff_t y_shift = static_cast<diff_t>(ky) - static_cast<diff_t>(p.pad);
                    for (std::size_t kx = 0; kx < p.kernel_w; ++kx) {
                        const TapRange rx = tap_range(kx, d.width, ow, p.stride, p.pad);
                        if (rx.hi < rx.lo) continue;
                        const T wv = w_p[ky * p.kernel_w + kx];
                        const diff_t x_shift = static_cast<diff_t>(kx) - static_cast<diff_t>(p.pad);
                        for (diff_t oy = ry.lo; oy <= ry.hi; ++oy) {
                            const T* in_row = in_p + (oy * stride + y_shift) * width;
                            T* out_row = out_p + oy * static_cast<diff_t>(ow);
                            if (stride == 1) {
                                const T* tap = in_row + rx.lo + x_shift;
                                for (diff_t ox = rx.lo; ox <= rx.hi; ++ox) {
                                    out_row[ox] += wv * tap[ox - rx.lo];
                                }
                            } else {
                                for (diff_t ox = rx.lo; ox <= rx.hi; ++ox) {
                                    out_row[ox] += wv * in_row[ox * stride + x_shift];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const TensorT<T>& grad_out, const TensorT<T>& input,
                             const TensorT<T>& weights, const ConvParams& p,
                             bool need_input_grad) {
    const SpatialDims d = spatial_dims(input.shape(), "conv2d_backward");
    check_conv_args(d, weights.shape(), p, "conv2d_backward");
    const std::size_t oh = conv_out_extent(d.height, p.kernel_h, p.stride, p.pad);
    const std::size_t ow = conv_out_extent(d.width, p.kernel_w, p.stride, p.pad);
    const Shape expected = d.batched ? Shape{d.batch, p.out_channels, oh, ow}
                                     : Shape{p.out_channels, oh, ow};
    if (grad_out.shape() != expected) {
        throw DimensionError("conv2d_backward: grad_out " + shape_string(grad_out.shape()) +
                             " does not match forward output " + shape_string(expected));
    }

    ConvGrads<T> g;
    g.weights = TensorT<T>(weights.shape());
    g.bias = TensorT<T>(Shape{p.out_channels});
    if (need_input_grad) g.input = TensorT<T>(input.shape());

    const T* in_base = input.data();
    const T* w_base = weights.data();
    const T* go_base = grad_out.data();
    T* gw_base = g.weights.data();
    T* gb = g.bias.data();
    T* gi_base = need_input_grad ? g.input.data() : nullptr;

    const std::size_t in_plane = d.height * d.width;
    const std::size_t in_sample = d.channels * in_plane;
    const std::size_t out_plane = oh * ow;
    const std::size_t out_sample = p.out_channels * out_plane;
    const std::size_t w_plane = p.kernel_h * p.kernel_w;
    const std::size_t w_filter = p.in_channels * w_plane;
    const diff_t stride = static_cast<diff_t>(p.stride);
    const diff_t width = static_cast<diff_t>(d.width);

    for (std::size_t n = 0; n < d.batch; ++n) {
        for (std::size_t co = 0; co < p.out_channels; ++co) {
            const T* go_p = go_base + n * out_sample + co * out_plane;
            T acc_b = T(0);
            for (std::size_t i = 0; i < out_plane; ++i) acc_b += go_p[i];
            gb[co] += acc_b;

            for (std::size_t ci = 0; ci < p.in_channels; ++ci) {
                const T* in_p = in_base + n * in_sample + ci * in_plane;
                const T* w_p = w_base + co * w_filter + ci * w_plane;
                T* gw_p = gw_base + co * w_filter + ci * w_plane;
                T* gi_p = need_input_grad ? gi_base + n * in_sample + ci * in_plane : nullptr;
                for (std::size_t ky = 0; ky < p.kernel_h; ++ky) {
                    const TapRange ry = tap_range(ky, d.height, oh, p.stride, p.pad);
                    if (ry.hi < ry.lo) continue;
                    const diff_t y_shift = static_cast<diff_t>(ky) - static_cast<diff_t>(p.pad);
                    for (std::size_t kx = 0; kx < p.kernel_w; ++kx) {
                        const TapRange rx = tap_range(kx, d.width, ow, p.stride, p.pad);
                        if (rx.hi < rx.lo) continue;
                        const diff_t x_shift = static_cast<diff_t>(kx) - static_cast<diff_t>(p.pad);
                        const T wv = w_p[ky * p.kernel_w + kx];
                        T acc_w = T(0);
                        for (diff_t oy = ry.lo; oy <= ry.hi; ++oy) {
                            const diff_t iy = oy * stride + y_shift;
                            const T* in_row = in_p + iy * width;
                            const T* go_row = go_p + oy * static_cast<diff_t>(ow);
                            T* gi_row = need_input_grad ? gi_p + iy * width : nullptr;
                            for (diff_t ox = rx.lo; ox <= rx.hi; ++ox) {
                                const diff_t ix = ox * stride + x_shift;
                                const T go_v = go_row[ox];
                                acc_w += go_v * in_row[ix];
                                if (need_input_grad) gi_row[ix] += wv * go_v;
                            }
                        }
                        gw_p[ky * p.kernel_w + kx] += acc_w;
                    }
                }
            }
        }
    }
    return g;
}

template <typename T>
PoolResult<T> maxpool2d(const TensorT<T>& input, std::size_t window, std::size_t stride) {
    const SpatialDims d = spatial_dims(input.shape(), "maxpool2d");
    if (window == 0 || stride == 0) {
        throw DimensionError("maxpool2d: window and stride must be positive");
    }
    if (window > d.height || window > d.width) {
        throw DimensionError("maxpool2d: window " + std::to_string(window) + " exceeds input " +
                             std::to_string(d.height) + "x" + std::to_string(d.width));
    }
    const std::size_t oh = conv_out_extent(d.height, window, stride, 0);
    const std::size_t ow = conv_out_extent(d.width, window, stride, 0);

    PoolResult<T> r;
    r.output = TensorT<T>(d.batched ? Shape{d.batch, d.channels, oh, ow}
                                    : Shape{d.channels, oh, ow});
    r.argmax.resize(r.output.size());

    const std::size_t planes = d.batch * d.channels;
    const std::size_t in_plane = d.height * d.width;
    const std::size_t out_plane = oh * ow;
    for (std::size_t pl = 0; pl < planes; ++pl) {
        const T* in_p = input.data() + pl * in_plane;
        T* out_p = r.output.data() + pl * out_plane;
        std::uint32_t* am_p = r.argmax.data() + pl * out_plane;
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                const std::size_t y0 = oy * stride;
                const std::size_t x0 = ox * stride;
                std::size_t best_i = y0 * d.width + x0;
                T best = in_p[best_i];
                for (std::size_t wy = 0; wy < window; ++wy) {
                    const std::size_t row = (y0 + wy) * d.width + x0;
                    for (std::size_t wx = 0; wx < window; ++wx) {
                        const T v = in_p[row + wx];
                        if (v > best) {
                            best = v;
                            best_i = row + wx;
                        }
                    }
                }
                out_p[oy * ow + ox] = best;
                am_p[oy * ow + ox] = static_cast<std::uint32_t>(best_i);
            }
        }
    }
    return r;
}

template <typename T>
TensorT<T> maxpool2d_backward(const TensorT<T>& grad_out, const std::vector<std::uint32_t>& argmax,
                              const Shape& input_shape) {
    const SpatialDims d = spatial_dims(input_shape, "maxpool2d_backward");
    const SpatialDims od = spatial_dims(grad_out.shape(), "maxpool2d_backward");
    if (od.batch != d.batch || od.channels != d.channels) {
        throw DimensionError("maxpool2d_backward: grad_out " + shape_string(grad_out.shape()) +
                             " does not match input " + shape_string(input_shape));
    }
    if (argmax.size() != grad_out.size()) {
        throw DimensionError("maxpool2d_backward: argmax has " + std::to_string(argmax.size()) +
                             " entries for " + std::to_string(grad_out.size()) + " outputs");
    }
    TensorT<T> grad_in(input_shape);
    const std::size_t planes = d.batch * d.channels;
    const std::size_t in_plane = d.height * d.width;
    const std::size_t out_plane = od.height * od.width;
    for (std::size_t pl = 0; pl < planes; ++pl) {
        const T* go_p = grad_out.data() + pl * out_plane;
        const std::uint32_t* am_p = argmax.data() + pl * out_plane;
        T* gi_p = grad_in.data() + pl * in_plane;
        for (std::size_t i = 0; i < out_plane; ++i) {
            if (am_p[i] >= in_plane) {
                throw DimensionError("maxpool2d_backward: argmax entry out of range");
            }
            gi_p[am_p[i]] += go_p[i];
        }
    }
    return grad_in;
}

template <typename T>
TensorT<T> relu(const TensorT<T>& input) {
    TensorT<T> out(input.shape());
    const T* in = input.data();
    T* o = out.data();
    for (std::size_t i = 0; i < input.size(); ++i) o[i] = in[i] > T(0) ? in[i] : T(0);
    return out;
}

template <typename T>
TensorT<T> relu_backward(const TensorT<T>& grad_out, const TensorT<T>& input) {
    if (grad_out.shape() != input.shape()) {
        throw DimensionError("relu_backward: grad_out " + shape_string(grad_out.shape()) +
                             " does not match input " + shape_string(input.shape()));
    }
    TensorT<T> grad_in(input.shape());
    const T* go = grad_out.data();
    const T* in = input.data();
    T* gi = grad_in.data();
    for (std::size_t i = 0; i < input.size(); ++i) gi[i] = in[i] > T(0) ? go[i] : T(0);
    return grad_in;
}

template <typename T>
TensorT<T> linear(const TensorT<T>& input, const TensorT<T>& weights, const TensorT<T>& bias) {
    if (input.rank() != 2) {
        throw DimensionError("linear: input must be NxD_in, got " + shape_string(input.shape()));
    }
    const std::size_t n = input.extent(0);
    const std::size_t d_in = input.extent(1);
    if (weights.rank() != 2 || weights.extent(1) != d_in) {
        throw DimensionError("linear: weights " + shape_string(weights.shape()) +
                             " do not accept input width " + std::to_string(d_in));
    }
    const std::size_t d_out = weights.extent(0);
    if (bias.rank() != 1 || bias.extent(0) != d_out) {
        throw DimensionError("linear: bias " + shape_string(bias.shape()) + " must have extent " +
                             std::to_string(d_out));
    }
    TensorT<T> out(Shape{n, d_out});
    for (std::size_t i = 0; i < n; ++i) {
        const T* in_row = input.data() + i * d_in;
        T* out_row = out.data() + i * d_out;
        for (std::size_t o = 0; o < d_out; ++o) {
            const T* w_row = weights.data() + o * d_in;
            T acc = bias[o];
            for (std::size_t k = 0; k < d_in; ++k) acc += in_row[k] * w_row[k];
            out_row[o] = acc;
        }
    }
    return out;
}

template <typename T>
LinearGrads<T> linear_backward(const TensorT<T>& grad_out, const TensorT<T>& input,
                               const TensorT<T>& weights) {
    if (input.rank() != 2 || weights.rank() != 2 || grad_out.rank() != 2) {
        throw DimensionError("linear_backward: rank-2 tensors required");
    }
    const std::size_t n = input.extent(0);
    const std::size_t d_in = input.extent(1);
    const std::size_t d_out = weights.extent(0);
    if (weights.extent(1) != d_in || grad_out.extent(0) != n || grad_out.extent(1) != d_out) {
        throw DimensionError("linear_backward: grad_out " + shape_string(grad_out.shape()) +
                             ", input " + shape_string(input.shape()) + ", weights " +
                             shape_string(weights.shape()) + " are inconsistent");
    }
    LinearGrads<T> g;
    g.input = TensorT<T>(input.shape());
    g.weights = TensorT<T>(weights.shape());
    g.bias = TensorT<T>(Shape{d_out});
    for (std::size_t i = 0; i < n; ++i) {
        const T* go_row = grad_out.data() + i * d_out;
        const T* in_row = input.data() + i * d_in;
        T* gi_row = g.input.data() + i * d_in;
        for (std::size_t o = 0; o < d_out; ++o) {
            const T go_v = go_row[o];
            if (go_v == T(0)) continue;
            const T* w_row = weights.data() + o * d_in;
            T* gw_row = g.weights.data() + o * d_in;
            for (std::size_t k = 0; k < d_in; ++k) {
                gi_row[k] += go_v * w_row[k];
                gw_row[k] += go_v * in_row[k];
            }
            g.bias[o] += go_v;
        }
    }
    return g;
}

template <typename T>
TensorT<T> softmax(const TensorT<T>& logits) {
    if (logits.rank() != 2) {
        throw DimensionError("softmax: logits must be NxK, got " + shape_string(logits.shape()));
    }
    const std::size_t n = logits.extent(0);
    const std::size_t k = logits.extent(1);
    TensorT<T> probs(logits.shape());
    for (std::size_t i = 0; i < n; ++i) {
        const T* row = logits.data() + i * k;
        T* out = probs.data() + i * k;
        T m = row[0];
        for (std::size_t j = 1; j < k; ++j) m = std::max(m, row[j]);
        T denom = T(0);
        for (std::size_t j = 0; j < k; ++j) {
            out[j] = std::exp(row[j] - m);
            denom += out[j];
        }
        for (std::size_t j = 0; j < k; ++j) out[j] /= denom;
    }
    return probs;
}

template <typename T>
SoftmaxLossResult<T> softmax_cross_entropy(const TensorT<T>& logits,
                                           const std::vector<std::size_t>& labels) {
    if (logits.rank() != 2) {
        throw DimensionError("softmax_cross_entropy: logits must be NxK, got " +
                             shape_string(logits.shape()));
    }
    const std::size_t n = logits.extent(0);
    const std::size_t k = logits.extent(1);
    if (labels.size() != n) {
        throw ValidationError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                              " labels for " + std::to_string(n) + " rows");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] >= k) {
            throw ValidationError("softmax_cross_entropy: label " + std::to_string(labels[i]) +
                                  " out of range [0, " + std::to_string(k) + ") at row " +
                                  std::to_string(i));
        }
    }

    SoftmaxLossResult<T> r;
    r.probabilities = softmax(logits);
    r.grad_logits = TensorT<T>(logits.shape());
    const T inv_n = T(1) / static_cast<T>(n);
    T loss = T(0);
    for (std::size_t i = 0; i < n; ++i) {
        const T* row = logits.data() + i * k;
        const T* p_row = r.probabilities.data() + i * k;
        T* g_row = r.grad_logits.data() + i * k;
        T m = row[0];
        for (std::size_t j = 1; j < k; ++j) m = std::max(m, row[j]);
        T denom = T(0);
        for (std::size_t j = 0; j < k; ++j) denom += std::exp(row[j] - m);
        loss += std::log(denom) - (row[labels[i]] - m);
        for (std::size_t j = 0; j < k; ++j) {
            g_row[j] = (p_row[j] - (j == labels[i] ? T(1) : T(0))) * inv_n;
        }
    }
    r.loss = loss * inv_n;
    return r;
}

#define RADSEQ_INSTANTIATE_OPS(T)                                                               \
    template TensorT<T> conv2d_forward<T>(const TensorT<T>&, const TensorT<T>&,                 \
                                          const TensorT<T>&, const ConvParams&);                \
    template ConvGrads<T> conv2d_backward<T>(const TensorT<T>&, const TensorT<T>&,              \
                                             const TensorT<T>&, const ConvParams&, bool);       \
    template PoolResult<T> maxpool2d<T>(const TensorT<T>&, std::size_t, std::size_t);           \
    template TensorT<T> maxpool2d_backward<T>(const TensorT<T>&,                                \
                                              const std::vector<std::uint32_t>&, const Shape&); \
    template TensorT<T> relu<T>(const TensorT<T>&);                                             \
    template TensorT<T> relu_backward<T>(const TensorT<T>&, const TensorT<T>&);                 \
    template TensorT<T> linear<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&);     \
    template LinearGrads<T> linear_backward<T>(const TensorT<T>&, const TensorT<T>&,            \
                                               const TensorT<T>&);                              \
    template TensorT<T> softmax<T>(const TensorT<T>&);                                          \
    template SoftmaxLossResult<T> softmax_cross_entropy<T>(const TensorT<T>&,                   \
                                                           const std::vector<std::size_t>&);

RADSEQ_INSTANTIATE_OPS(float)
RADSEQ_INSTANTIATE_OPS(double)

#undef RADSEQ_INSTANTIATE_OPS

}  // namespace radseq
