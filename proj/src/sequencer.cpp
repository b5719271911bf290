#include "radseq/sequencer.hpp"

#include <cmath>
#include <utility>

#include "radseq/rng.hpp"

namespace radseq {

LayerDesc LayerDesc::conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
                            std::size_t stride, std::size_t pad) {
    LayerDesc d;
    d.kind = LayerKind::Conv;
    d.conv = ConvParams{in_ch, out_ch, kernel, kernel, stride, pad};
    return d;
}

LayerDesc LayerDesc::activation() {
    LayerDesc d;
    d.kind = LayerKind::Activation;
    return d;
}

LayerDesc LayerDesc::pool(std::size_t window, std::size_t stride) {
    LayerDesc d;
    d.kind = LayerKind::Pool;
    d.pool_window = window;
    d.pool_stride = stride;
    return d;
}

LayerDesc LayerDesc::flatten() {
    LayerDesc d;
    d.kind = LayerKind::Flatten;
    return d;
}

LayerDesc LayerDesc::fully_connected(std::size_t out, std::size_t in) {
    LayerDesc d;
    d.kind = LayerKind::FullyConnected;
    d.fc_out = out;
    d.fc_in = in;
    return d;
}

namespace {

std::string layer_label(const LayerDesc& d, std::size_t conv_n, std::size_t fc_n) {
    switch (d.kind) {
        case LayerKind::Conv: return "conv" + std::to_string(conv_n);
        case LayerKind::Activation: return "activation";
        case LayerKind::Pool: return "pool";
        case LayerKind::Flatten: return "flatten";
        case LayerKind::FullyConnected: return "fc" + std::to_string(fc_n);
    }
    return "?";
}

[[noreturn]] void column_error(std::size_t column, std::size_t layer, const std::string& label,
                               const std::string& detail) {
    throw ValidationError("column " + std::to_string(column) + ", layer " + std::to_string(layer) +
                          " (" + label + "): " + detail);
}

/// Parameter base names per layer; empty for layers without parameters.
std::vector<std::string> column_param_names(const ColumnSpec& col, std::size_t column_index) {
    std::vector<std::string> names(col.layers.size());
    std::size_t conv_n = 0;
    std::size_t fc_n = 0;
    for (std::size_t i = 0; i < col.layers.size(); ++i) {
        switch (col.layers[i].kind) {
            case LayerKind::Conv:
                names[i] = "col" + std::to_string(column_index) + ".conv" + std::to_string(++conv_n);
                break;
            case LayerKind::FullyConnected:
                names[i] = "col" + std::to_string(column_index) + ".fc" + std::to_string(++fc_n);
                break;
            default:
                break;
        }
    }
    return names;
}

}  // namespace

ModelPlan plan_model(const ModelSpec& spec) {
    const SequencerSpec& s = spec.sequencer;
    if (s.columns.empty()) throw ValidationError("sequencer spec has no columns");
    if (s.merge != "concat") {
        throw ValidationError("unknown merge rule '" + s.merge + "' (supported: concat)");
    }
    if (s.input_channels == 0 || s.input_h == 0 || s.input_w == 0) {
        throw ValidationError("sequencer input shape must have positive extents");
    }
    if (spec.head.hidden_width == 0 || spec.head.class_count == 0) {
        throw ValidationError("head widths must be positive");
    }

    ModelPlan plan;
    plan.columns.resize(s.columns.size());
    for (std::size_t c = 0; c < s.columns.size(); ++c) {
        const ColumnSpec& col = s.columns[c];
        ColumnPlan& cp = plan.columns[c];
        Shape cur{s.input_channels, s.input_h, s.input_w};
        std::size_t conv_n = 0;
        std::size_t fc_n = 0;
        for (std::size_t i = 0; i < col.layers.size(); ++i) {
            const LayerDesc& d = col.layers[i];
            std::string label = layer_label(d, conv_n + (d.kind == LayerKind::Conv ? 1 : 0),
                                            fc_n + (d.kind == LayerKind::FullyConnected ? 1 : 0));
            switch (d.kind) {
                case LayerKind::Conv: {
                    ++conv_n;
                    if (cur.size() != 3) {
                        column_error(c, i, label, "convolution requires a CxHxW input, have " +
                                                      shape_string(cur));
                    }
                    if (d.conv.in_channels != cur[0]) {
                        column_error(c, i, label,
                                     "declared in_channels " + std::to_string(d.conv.in_channels) +
                                         " but incoming tensor has " + std::to_string(cur[0]) +
                                         " channels");
                    }
                    if (d.conv.out_channels == 0) column_error(c, i, label, "out_channels must be positive");
                    std::size_t oh = 0, ow = 0;
                    try {
                        oh = conv_out_extent(cur[1], d.conv.kernel_h, d.conv.stride, d.conv.pad);
                        ow = conv_out_extent(cur[2], d.conv.kernel_w, d.conv.stride, d.conv.pad);
                    } catch (const DimensionError& e) {
                        column_error(c, i, label, e.what());
                    }
                    cur = {d.conv.out_channels, oh, ow};
                    break;
                }
                case LayerKind::Activation:
                    break;
                case LayerKind::Pool: {
                    if (cur.size() != 3) {
                        column_error(c, i, label,
                                     "pooling requires a CxHxW input, have " + shape_string(cur));
                    }
                    if (d.pool_window == 0 || d.pool_stride == 0) {
                        column_error(c, i, label, "pool window and stride must be positive");
                    }
                    if (d.pool_window > cur[1] || d.pool_window > cur[2]) {
                        column_error(c, i, label,
                                     "pool window " + std::to_string(d.pool_window) +
                                         " exceeds input " + std::to_string(cur[1]) + "x" +
                                         std::to_string(cur[2]));
                    }
                    cur = {cur[0], conv_out_extent(cur[1], d.pool_window, d.pool_stride, 0),
                           conv_out_extent(cur[2], d.pool_window, d.pool_stride, 0)};
                    break;
                }
                case LayerKind::Flatten: {
                    if (cur.size() != 3) {
                        column_error(c, i, label,
                                     "flatten requires a CxHxW input, have " + shape_string(cur));
                    }
                    cur = {cur[0] * cur[1] * cur[2]};
                    break;
                }
                case LayerKind::FullyConnected: {
                    ++fc_n;
                    if (cur.size() != 1) {
                        column_error(c, i, label, "fully-connected requires a flattened input, have " +
                                                      shape_string(cur));
                    }
                    if (d.fc_out == 0) column_error(c, i, label, "output width must be positive");
                    if (d.fc_in != 0 && d.fc_in != cur[0]) {
                        column_error(c, i, label,
                                     "declared input width " + std::to_string(d.fc_in) +
                                         " but incoming width is " + std::to_string(cur[0]));
                    }
                    cur = {d.fc_out};
                    break;
                }
            }
            cp.layer_outputs.push_back(cur);
        }
        if (conv_n != 5) {
            throw ValidationError("column " + std::to_string(c) + " has " + std::to_string(conv_n) +
                                  " convolutional layers, the architecture requires exactly 5");
        }
        if (fc_n == 0 || cur.size() != 1) {
            throw ValidationError("column " + std::to_string(c) +
                                  " must end in a fully-connected width, have " + shape_string(cur));
        }
        cp.terminal_width = cur[0];
        plan.sequence_length += cp.terminal_width;
    }
    return plan;
}

ModelSpec default_spec() {
    ColumnSpec col;
    col.layers = {
        LayerDesc::conv2d(3, 96, 7, 2, 0),
        LayerDesc::activation(),
        LayerDesc::pool(3, 2),
        LayerDesc::conv2d(96, 256, 5, 1, 2),
        LayerDesc::activation(),
        LayerDesc::pool(3, 2),
        LayerDesc::conv2d(256, 384, 3, 1, 1),
        LayerDesc::activation(),
        LayerDesc::conv2d(384, 384, 3, 1, 1),
        LayerDesc::activation(),
        LayerDesc::conv2d(384, 256, 5, 1, 2),
        LayerDesc::activation(),
        LayerDesc::pool(3, 2),
        LayerDesc::flatten(),
        LayerDesc::fully_connected(8192, 9216),
        LayerDesc::activation(),
    };
    ModelSpec spec;
    spec.sequencer.input_channels = 3;
    spec.sequencer.input_h = 128;
    spec.sequencer.input_w = 128;
    spec.sequencer.columns = {col, col};
    spec.head.hidden_width = 1024;
    spec.head.class_count = 2;
    return spec;
}

ModelSpec reduced_spec() {
    ColumnSpec col;
    col.layers = {
        LayerDesc::conv2d(3, 8, 7, 2, 0),
        LayerDesc::activation(),
        LayerDesc::pool(3, 2),
        LayerDesc::conv2d(8, 16, 5, 1, 2),
        LayerDesc::activation(),
        LayerDesc::pool(3, 2),
        LayerDesc::conv2d(16, 24, 3, 1, 1),
        LayerDesc::activation(),
        LayerDesc::conv2d(24, 24, 3, 1, 1),
        LayerDesc::activation(),
        LayerDesc::conv2d(24, 16, 5, 1, 2),
        LayerDesc::activation(),
        LayerDesc::pool(3, 2),
        LayerDesc::flatten(),
        LayerDesc::fully_connected(64, 16),
        LayerDesc::activation(),
    };
    ModelSpec spec;
    spec.sequencer.input_channels = 3;
    spec.sequencer.input_h = 40;
    spec.sequencer.input_w = 40;
    spec.sequencer.columns = {col, col};
    spec.head.hidden_width = 16;
    spec.head.class_count = 2;
    return spec;
}

namespace {

template <typename T>
TensorT<T> init_weight(Shape shape, std::size_t fan_in, Rng& rng) {
    TensorT<T> w(std::move(shape));
    const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = static_cast<T>(rng.normal() * scale);
    }
    return w;
}

}  // namespace

std::map<std::string, Shape> parameter_shapes(const ModelSpec& spec) {
    const ModelPlan plan = plan_model(spec);
    std::map<std::string, Shape> shapes;
    for (std::size_t c = 0; c < spec.sequencer.columns.size(); ++c) {
        const ColumnSpec& col = spec.sequencer.columns[c];
        const std::vector<std::string> names = column_param_names(col, c);
        Shape cur{spec.sequencer.input_channels, spec.sequencer.input_h, spec.sequencer.input_w};
        for (std::size_t i = 0; i < col.layers.size(); ++i) {
            const LayerDesc& d = col.layers[i];
            if (d.kind == LayerKind::Conv) {
                shapes[names[i] + ".weight"] = {d.conv.out_channels, d.conv.in_channels,
                                                d.conv.kernel_h, d.conv.kernel_w};
                shapes[names[i] + ".bias"] = {d.conv.out_channels};
            } else if (d.kind == LayerKind::FullyConnected) {
                shapes[names[i] + ".weight"] = {d.fc_out, cur[0]};
                shapes[names[i] + ".bias"] = {d.fc_out};
            }
            cur = plan.columns[c].layer_outputs[i];
        }
    }
    shapes["head.fc1.weight"] = {spec.head.hidden_width, plan.sequence_length};
    shapes["head.fc1.bias"] = {spec.head.hidden_width};
    shapes["head.fc2.weight"] = {spec.head.class_count, spec.head.hidden_width};
    shapes["head.fc2.bias"] = {spec.head.class_count};
    return shapes;
}

template <typename T>
SequencerModelT<T> build(const ModelSpec& spec, std::uint64_t seed) {
    const ModelPlan plan = plan_model(spec);
    SequencerModelT<T> model;
    model.spec = spec;
    model.seed = seed;

    Rng rng(seed);
    for (std::size_t c = 0; c < spec.sequencer.columns.size(); ++c) {
        const ColumnSpec& col = spec.sequencer.columns[c];
        const std::vector<std::string> names = column_param_names(col, c);
        Shape cur{spec.sequencer.input_channels, spec.sequencer.input_h, spec.sequencer.input_w};
        for (std::size_t i = 0; i < col.layers.size(); ++i) {
            const LayerDesc& d = col.layers[i];
            if (d.kind == LayerKind::Conv) {
                const ConvParams& p = d.conv;
                const std::size_t fan_in = p.in_channels * p.kernel_h * p.kernel_w;
                model.params[names[i] + ".weight"] = init_weight<T>(
                    {p.out_channels, p.in_channels, p.kernel_h, p.kernel_w}, fan_in, rng);
                model.params[names[i] + ".bias"] = TensorT<T>(Shape{p.out_channels});
            } else if (d.kind == LayerKind::FullyConnected) {
                const std::size_t fan_in = cur[0];
                model.params[names[i] + ".weight"] = init_weight<T>({d.fc_out, fan_in}, fan_in, rng);
                model.params[names[i] + ".bias"] = TensorT<T>(Shape{d.fc_out});
            }
            cur = plan.columns[c].layer_outputs[i];
        }
    }
    const std::size_t seq_len = plan.sequence_length;
    model.params["head.fc1.weight"] = init_weight<T>({spec.head.hidden_width, seq_len}, seq_len, rng);
    model.params["head.fc1.bias"] = TensorT<T>(Shape{spec.head.hidden_width});
    model.params["head.fc2.weight"] =
        init_weight<T>({spec.head.class_count, spec.head.hidden_width}, spec.head.hidden_width, rng);
    model.params["head.fc2.bias"] = TensorT<T>(Shape{spec.head.class_count});
    return model;
}

template <typename T>
ForwardResultT<T> forward(const SequencerModelT<T>& model, const TensorT<T>& batch) {
    const SequencerSpec& s = model.spec.sequencer;
    if (batch.rank() != 4 || batch.extent(1) != s.input_channels || batch.extent(2) != s.input_h ||
        batch.extent(3) != s.input_w) {
        throw DimensionError("forward: batch " + shape_string(batch.shape()) +
                             " does not match spec input Nx" + std::to_string(s.input_channels) +
                             "x" + std::to_string(s.input_h) + "x" + std::to_string(s.input_w));
    }
    if (!model.column_preprocess.empty() && model.column_preprocess.size() != s.columns.size()) {
        throw ValidationError("forward: " + std::to_string(model.column_preprocess.size()) +
                              " preprocess hooks for " + std::to_string(s.columns.size()) +
                              " columns");
    }
    const ModelPlan plan = plan_model(model.spec);
    const std::size_t n = batch.extent(0);

    ForwardResultT<T> result;
    ForwardCacheT<T>& cache = result.cache;
    cache.revision = model.revision;
    cache.batch = n;
    cache.columns.resize(s.columns.size());

    TensorT<T> sequence(Shape{n, plan.sequence_length});
    std::size_t offset = 0;
    for (std::size_t c = 0; c < s.columns.size(); ++c) {
        const ColumnSpec& col = s.columns[c];
        const std::vector<std::string> names = column_param_names(col, c);
        std::vector<LayerCacheT<T>>& col_cache = cache.columns[c];
        col_cache.resize(col.layers.size());

        TensorT<T> x = batch;
        if (!model.column_preprocess.empty() && model.column_preprocess[c]) {
            x = model.column_preprocess[c](batch);
            if (x.shape() != batch.shape()) {
                throw DimensionError("forward: column " + std::to_string(c) +
                                     " preprocess changed the input shape to " +
                                     shape_string(x.shape()));
            }
        }
        for (std::size_t i = 0; i < col.layers.size(); ++i) {
            const LayerDesc& d = col.layers[i];
            LayerCacheT<T>& lc = col_cache[i];
            switch (d.kind) {
                case LayerKind::Conv: {
                    TensorT<T> y = conv2d_forward(x, model.params.at(names[i] + ".weight"),
                                                  model.params.at(names[i] + ".bias"), d.conv);
                    lc.input = std::move(x);
                    x = std::move(y);
                    break;
                }
                case LayerKind::Activation: {
                    TensorT<T> y = relu(x);
                    lc.input = std::move(x);
                    x = std::move(y);
                    break;
                }
                case LayerKind::Pool: {
                    lc.input_shape = x.shape();
                    PoolResult<T> pr = maxpool2d(x, d.pool_window, d.pool_stride);
                    lc.argmax = std::move(pr.argmax);
                    x = std::move(pr.output);
                    break;
                }
                case LayerKind::Flatten: {
                    lc.input_shape = x.shape();
                    x = x.reshaped({n, x.size() / n});
                    break;
                }
                case LayerKind::FullyConnected: {
                    TensorT<T> y = linear(x, model.params.at(names[i] + ".weight"),
                                          model.params.at(names[i] + ".bias"));
                    lc.input = std::move(x);
                    x = std::move(y);
                    break;
                }
            }
        }
        const std::size_t width = plan.columns[c].terminal_width;
        for (std::size_t row = 0; row < n; ++row) {
            const T* src = x.data() + row * width;
            T* dst = sequence.data() + row * plan.sequence_length + offset;
            for (std::size_t j = 0; j < width; ++j) dst[j] = src[j];
        }
        offset += width;
    }

    cache.sequence = sequence;
    cache.head_fc1_out =
        linear(sequence, model.params.at("head.fc1.weight"), model.params.at("head.fc1.bias"));
    cache.head_relu_out = relu(cache.head_fc1_out);
    cache.logits = linear(cache.head_relu_out, model.params.at("head.fc2.weight"),
                          model.params.at("head.fc2.bias"));
    result.probabilities = softmax(cache.logits);
    result.sequences = std::move(sequence);
    return result;
}

template <typename T>
std::map<std::string, TensorT<T>> backward(const SequencerModelT<T>& model,
                                           const ForwardCacheT<T>& cache,
                                           const TensorT<T>& grad_logits) {
    if (cache.revision != model.revision) {
        throw ValidationError(
            "backward: cache revision " + std::to_string(cache.revision) +
            " does not match model revision " + std::to_string(model.revision) +
            " (parameters changed since the forward pass)");
    }
    const SequencerSpec& s = model.spec.sequencer;
    if (cache.columns.size() != s.columns.size()) {
        throw ValidationError("backward: cache does not match the model's column count");
    }
    const std::size_t n = cache.batch;
    if (grad_logits.rank() != 2 || grad_logits.extent(0) != n ||
        grad_logits.extent(1) != model.spec.head.class_count) {
        throw DimensionError("backward: grad_logits " + shape_string(grad_logits.shape()) +
                             " must be " + std::to_string(n) + "x" +
                             std::to_string(model.spec.head.class_count));
    }
    const ModelPlan plan = plan_model(model.spec);

    std::map<std::string, TensorT<T>> grads;

    LinearGrads<T> fc2 =
        linear_backward(grad_logits, cache.head_relu_out, model.params.at("head.fc2.weight"));
    grads["head.fc2.weight"] = std::move(fc2.weights);
    grads["head.fc2.bias"] = std::move(fc2.bias);
    TensorT<T> g = relu_backward(fc2.input, cache.head_fc1_out);
    LinearGrads<T> fc1 = linear_backward(g, cache.sequence, model.params.at("head.fc1.weight"));
    grads["head.fc1.weight"] = std::move(fc1.weights);
    grads["head.fc1.bias"] = std::move(fc1.bias);
    const TensorT<T>& grad_sequence = fc1.input;

    std::size_t offset = 0;
    for (std::size_t c = 0; c < s.columns.size(); ++c) {
        const ColumnSpec& col = s.columns[c];
        const std::vector<std::string> names = column_param_names(col, c);
        const std::vector<LayerCacheT<T>>& col_cache = cache.columns[c];
        if (col_cache.size() != col.layers.size()) {
            throw ValidationError("backward: cache does not match column " + std::to_string(c));
        }
        const std::size_t width = plan.columns[c].terminal_width;

        TensorT<T> gx(Shape{n, width});
        for (std::size_t row = 0; row < n; ++row) {
            const T* src = grad_sequence.data() + row * plan.sequence_length + offset;
            T* dst = gx.data() + row * width;
            for (std::size_t j = 0; j < width; ++j) dst[j] = src[j];
        }
        offset += width;

        for (std::size_t i = col.layers.size(); i-- > 0;) {
            const LayerDesc& d = col.layers[i];
            const LayerCacheT<T>& lc = col_cache[i];
            switch (d.kind) {
                case LayerKind::Conv: {
                    ConvGrads<T> cg =
                        conv2d_backward(gx, lc.input, model.params.at(names[i] + ".weight"), d.conv,
                                        /*need_input_grad=*/i > 0);
                    grads[names[i] + ".weight"] = std::move(cg.weights);
                    grads[names[i] + ".bias"] = std::move(cg.bias);
                    gx = std::move(cg.input);
                    break;
                }
                case LayerKind::Activation:
                    gx = relu_backward(gx, lc.input);
                    break;
                case LayerKind::Pool:
                    gx = maxpool2d_backward(gx, lc.argmax, lc.input_shape);
                    break;
                case LayerKind::Flatten:
                    gx = gx.reshaped(lc.input_shape);
                    break;
                case LayerKind::FullyConnected: {
                    LinearGrads<T> lg =
                        linear_backward(gx, lc.input, model.params.at(names[i] + ".weight"));
                    grads[names[i] + ".weight"] = std::move(lg.weights);
                    grads[names[i] + ".bias"] = std::move(lg.bias);
                    gx = std::move(lg.input);
                    break;
                }
            }
        }
    }
    return grads;
}

RadiomicSequence extract_sequence(const SequencerModel& model, const Tensor& image) {
    if (image.rank() != 3) {
        throw DimensionError("extract_sequence: image must be CxHxW, got " +
                             shape_string(image.shape()));
    }
    Shape batched = {1, image.extent(0), image.extent(1), image.extent(2)};
    ForwardResultT<float> r = forward(model, image.reshaped(std::move(batched)));
    RadiomicSequence seq;
    seq.values.assign(r.sequences.data(), r.sequences.data() + r.sequences.size());
    for (float v : seq.values) {
        if (!std::isfinite(v)) {
            throw DataError("extract_sequence: non-finite value in radiomic sequence");
        }
    }
    return seq;
}

#define RADSEQ_INSTANTIATE_SEQ(T)                                                          \
    template SequencerModelT<T> build<T>(const ModelSpec&, std::uint64_t);                 \
    template ForwardResultT<T> forward<T>(const SequencerModelT<T>&, const TensorT<T>&);   \
    template std::map<std::string, TensorT<T>> backward<T>(                                \
        const SequencerModelT<T>&, const ForwardCacheT<T>&, const TensorT<T>&);

RADSEQ_INSTANTIATE_SEQ(float)
RADSEQ_INSTANTIATE_SEQ(double)

#undef RADSEQ_INSTANTIATE_SEQ

}  // namespace radseq
