#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "radseq/nn_ops.hpp"
#include "radseq/tensor.hpp"

namespace radseq {

enum class LayerKind { Conv, Activation, Pool, Flatten, FullyConnected };

/// One layer of a column. Only the fields of the active kind are meaningful.
struct LayerDesc {
    LayerKind kind = LayerKind::Activation;
    ConvParams conv;                          // Conv
    std::size_t pool_window = 0;              // Pool
    std::size_t pool_stride = 0;              // Pool
    std::size_t fc_in = 0;                    // FullyConnected; 0 = inferred
    std::size_t fc_out = 0;                   // FullyConnected

    static LayerDesc conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
                            std::size_t stride, std::size_t pad);
    static LayerDesc activation();
    static LayerDesc pool(std::size_t window, std::size_t stride);
    static LayerDesc flatten();
    static LayerDesc fully_connected(std::size_t out, std::size_t in = 0);

    bool operator==(const LayerDesc&) const = default;
};

struct ColumnSpec {
    std::vector<LayerDesc> layers;
    bool operator==(const ColumnSpec&) const = default;
};

/// Multi-column architecture: every column sees the same input; terminal
/// column outputs are merged by concatenation in column order.
struct SequencerSpec {
    std::size_t input_channels = 3;
    std::size_t input_h = 128;
    std::size_t input_w = 128;
    std::vector<ColumnSpec> columns;
    std::string merge = "concat";
    bool operator==(const SequencerSpec&) const = default;
};

/// Classifier head: fully-connected, activation, fully-connected, softmax.
struct HeadSpec {
    std::size_t hidden_width = 1024;
    std::size_t class_count = 2;
    bool operator==(const HeadSpec&) const = default;
};

struct ModelSpec {
    SequencerSpec sequencer;
    HeadSpec head;
    bool operator==(const ModelSpec&) const = default;
};

/// Shape trace of one column from the input to its terminal width.
struct ColumnPlan {
    std::vector<Shape> layer_outputs;   // one entry per layer
    std::size_t terminal_width = 0;
};

struct ModelPlan {
    std::vector<ColumnPlan> columns;
    std::size_t sequence_length = 0;    // sum of terminal widths
};

/// Validates layer-to-layer consistency and returns the shape trace.
/// Throws ValidationError naming the first offending layer.
ModelPlan plan_model(const ModelSpec& spec);

/// The full two-column architecture: per column five conv layers 96@7x7/s2,
/// 256@5x5/p2, 384@3x3/p1, 384@3x3/p1, 256@5x5/p2 with 3x3/s2 max pools
/// after conv1, conv2, and conv5, then flatten and a fully-connected layer
/// of 8192 units. Default input 3x128x128, head 1024 hidden units,
/// 2 classes. Merged sequence length 16384.
ModelSpec default_spec();

/// Same topology at desk scale for finite-difference checks: input 3x40x40,
/// filter counts [8,16,24,24,16], terminal width 64, head hidden 16.
ModelSpec reduced_spec();

template <typename T>
struct SequencerModelT {
    ModelSpec spec;
    std::uint64_t seed = 0;
    /// Named parameters, e.g. "col0.conv1.weight", "head.fc2.bias".
    std::map<std::string, TensorT<T>> params;
    /// Bumped on every parameter mutation; forward caches record it so a
    /// stale cache cannot silently feed backward.
    std::uint64_t revision = 0;
    /// Optional per-column input hook (identity when empty). Applied before
    /// the column's first layer; cached post-hook, so parameter gradients
    /// remain exact for any hook.
    std::vector<std::function<TensorT<T>(const TensorT<T>&)>> column_preprocess;
};

using SequencerModel = SequencerModelT<float>;

/// Shapes of every named parameter the spec allocates, keyed like
/// SequencerModelT::params.
std::map<std::string, Shape> parameter_shapes(const ModelSpec& spec);

/// Allocates and initializes parameters: biases zero, weights from a normal
/// distribution scaled by sqrt(2 / fan_in), drawn from a seeded generator in
/// a fixed order. Identical seed gives bit-identical parameters.
template <typename T>
SequencerModelT<T> build(const ModelSpec& spec, std::uint64_t seed);

template <typename T>
struct LayerCacheT {
    TensorT<T> input;                   // Conv / Activation / FullyConnected
    std::vector<std::uint32_t> argmax;  // Pool
    Shape input_shape;                  // Pool / Flatten
};

template <typename T>
struct ForwardCacheT {
    std::uint64_t revision = 0;
    std::size_t batch = 0;
    std::vector<std::vector<LayerCacheT<T>>> columns;
    TensorT<T> sequence;       // N x L, input to head fc1
    TensorT<T> head_fc1_out;   // pre-activation
    TensorT<T> head_relu_out;  // input to head fc2
    TensorT<T> logits;
};

template <typename T>
struct ForwardResultT {
    TensorT<T> sequences;      // N x L radiomic sequences
    TensorT<T> probabilities;  // N x K, rows sum to 1
    ForwardCacheT<T> cache;
};

/// Runs every column over the batch, concatenates terminal outputs into the
/// radiomic sequence, and applies the classifier head.
template <typename T>
ForwardResultT<T> forward(const SequencerModelT<T>& model, const TensorT<T>& batch);

/// Gradients for every parameter tensor, keyed like model.params.
/// grad_logits is the loss gradient at the head's logits.
template <typename T>
std::map<std::string, TensorT<T>> backward(const SequencerModelT<T>& model,
                                           const ForwardCacheT<T>& cache,
                                           const TensorT<T>& grad_logits);

struct RadiomicSequence {
    std::vector<float> values;
};

/// Sequence for a single CxHxW image; the head is not applied. Equals the
/// corresponding row of a batched forward exactly.
RadiomicSequence extract_sequence(const SequencerModel& model, const Tensor& image);

}  // namespace radseq
