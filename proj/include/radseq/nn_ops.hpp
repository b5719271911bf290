#pragma once

#include <cstdint>
#include <vector>

#include "radseq/tensor.hpp"

namespace radseq {

/// 2-D convolution geometry. Convolution is computed as cross-correlation
/// (no kernel flip) over symmetric zero padding.
struct ConvParams {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel_h = 0;
    std::size_t kernel_w = 0;
    std::size_t stride = 1;
    std::size_t pad = 0;
    bool operator==(const ConvParams&) const = default;
};

/// floor((in + 2*pad - kernel) / stride) + 1. Throws DimensionError when the
/// kernel does not fit the padded input or stride is zero.
std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad);

/// input CxHxW or NxCxHxW; weights C_out x C_in x kh x kw; bias C_out.
/// Output rank matches the input rank.
template <typename T>
TensorT<T> conv2d_forward(const TensorT<T>& input, const TensorT<T>& weights,
                          const TensorT<T>& bias, const ConvParams& params);

template <typename T>
struct ConvGrads {
    TensorT<T> input;
    TensorT<T> weights;
    TensorT<T> bias;
};

/// Exact analytic gradients of conv2d_forward. grad_out must match the
/// forward output shape. Set need_input_grad=false to skip the (unused)
/// input gradient of a network's first layer.
template <typename T>
ConvGrads<T> conv2d_backward(const TensorT<T>& grad_out, const TensorT<T>& input,
                             const TensorT<T>& weights, const ConvParams& params,
                             bool need_input_grad = true);

template <typename T>
struct PoolResult {
    TensorT<T> output;
    /// Flat spatial index (iy * W + ix) of the winning element per output
    /// element, ties broken to the lowest flat index.
    std::vector<std::uint32_t> argmax;
};

template <typename T>
PoolResult<T> maxpool2d(const TensorT<T>& input, std::size_t window, std::size_t stride);

/// Routes each output gradient entirely to its recorded argmax position.
template <typename T>
TensorT<T> maxpool2d_backward(const TensorT<T>& grad_out, const std::vector<std::uint32_t>& argmax,
                              const Shape& input_shape);

/// Elementwise max(0, x).
template <typename T>
TensorT<T> relu(const TensorT<T>& input);

/// Passes gradient where input > 0; the subgradient at 0 is 0.
template <typename T>
TensorT<T> relu_backward(const TensorT<T>& grad_out, const TensorT<T>& input);

/// input N x D_in; weights D_out x D_in; bias D_out -> N x D_out.
template <typename T>
TensorT<T> linear(const TensorT<T>& input, const TensorT<T>& weights, const TensorT<T>& bias);

template <typename T>
struct LinearGrads {
    TensorT<T> input;
    TensorT<T> weights;
    TensorT<T> bias;
};

template <typename T>
LinearGrads<T> linear_backward(const TensorT<T>& grad_out, const TensorT<T>& input,
                               const TensorT<T>& weights);

/// Row-wise softmax with max subtraction; each row sums to 1 within 1e-6.
template <typename T>
TensorT<T> softmax(const TensorT<T>& logits);

template <typename T>
struct SoftmaxLossResult {
    T loss;                    // mean negative log-probability of the true class
    TensorT<T> probabilities;  // N x K
    TensorT<T> grad_logits;    // (softmax - one_hot) / N
};

/// logits N x K, labels[i] in [0, K). Throws ValidationError on an
/// out-of-range label.
template <typename T>
SoftmaxLossResult<T> softmax_cross_entropy(const TensorT<T>& logits,
                                           const std::vector<std::size_t>& labels);

}  // namespace radseq
