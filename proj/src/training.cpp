#include "radseq/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "radseq/nn_ops.hpp"
#include "radseq/rng.hpp"

namespace radseq {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw ValidationError("learning_rate must be positive, got " +
                              std::to_string(learning_rate));
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) {
        throw ValidationError("momentum must be in [0, 1), got " + std::to_string(momentum));
    }
    if (batch_size == 0) throw ValidationError("batch_size must be positive");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
        throw ValidationError("weight_decay must be non-negative, got " +
                              std::to_string(weight_decay));
    }
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    for (const auto& [key, value] : j.items()) {
        if (key == "learning_rate") {
            c.learning_rate = value.get<double>();
        } else if (key == "momentum") {
            c.momentum = value.get<double>();
        } else if (key == "batch_size") {
            c.batch_size = value.get<std::size_t>();
        } else if (key == "epochs") {
            c.epochs = value.get<std::size_t>();
        } else if (key == "seed") {
            c.seed = value.get<std::uint64_t>();
        } else if (key == "per_class_train_count") {
            c.per_class_train_count = value.get<std::size_t>();
        } else if (key == "weight_decay") {
            c.weight_decay = value.get<double>();
        } else {
            throw ValidationError("unknown training config key '" + key + "'");
        }
    }
    c.validate();
    return c;
}

nlohmann::json TrainConfig::to_json() const {
    return nlohmann::json{
        {"learning_rate", learning_rate},
        {"momentum", momentum},
        {"batch_size", batch_size},
        {"epochs", epochs},
        {"seed", seed},
        {"per_class_train_count", per_class_train_count},
        {"weight_decay", weight_decay},
    };
}

TrainState TrainState::init(SequencerModel model) {
    TrainState state;
    for (const auto& [name, param] : model.params) {
        state.velocity.emplace(name, Tensor(param.shape()));
    }
    state.model = std::move(model);
    return state;
}

void sgd_step(TrainState& state, const std::map<std::string, Tensor>& gradients,
              const TrainConfig& config) {
    config.validate();
    const float lr = static_cast<float>(config.learning_rate);
    const float mu = static_cast<float>(config.momentum);
    const float wd = static_cast<float>(config.weight_decay);

    for (auto& [name, param] : state.model.params) {
        const auto git = gradients.find(name);
        if (git == gradients.end()) {
            throw ValidationError("sgd_step: missing gradient for parameter '" + name + "'");
        }
        const Tensor& grad = git->second;
        if (grad.shape() != param.shape()) {
            throw ValidationError("sgd_step: gradient for '" + name + "' has shape " +
                                  shape_string(grad.shape()) + ", parameter is " +
                                  shape_string(param.shape()));
        }
        Tensor& vel = state.velocity.at(name);
        float* p = param.data();
        float* v = vel.data();
        const float* g = grad.data();
        for (std::size_t i = 0; i < param.size(); ++i) {
            v[i] = mu * v[i] - lr * (g[i] + wd * p[i]);
            p[i] += v[i];
        }
    }
    ++state.model.revision;
}

namespace {

struct LoadedSplit {
    std::vector<Tensor> inputs;
    std::vector<int> labels;
};

LoadedSplit load_split(const DatasetManifest& split, const SequencerSpec& spec) {
    LoadedSplit out;
    out.inputs.reserve(split.records.size());
    out.labels.reserve(split.records.size());
    for (const DatasetRecord& rec : split.records) {
        try {
            Tensor img = decode_image(rec.path);
            out.inputs.push_back(resize_bilinear(img, spec.input_h, spec.input_w));
        } catch (const DataError& e) {
            throw DataError("train: record '" + rec.path + "': " + e.what());
        }
        out.labels.push_back(rec.label);
    }
    return out;
}

bool has_both_classes(const std::vector<int>& labels) {
    bool benign = false;
    bool malignant = false;
    for (int l : labels) {
        (l == kMalignant ? malignant : benign) = true;
    }
    return benign && malignant;
}

}  // namespace

TrainResult train(const DatasetManifest& manifest, const ModelSpec& spec,
                  const TrainConfig& config, std::ostream* log) {
    config.validate();
    plan_model(spec);
    if (spec.sequencer.input_channels != 3) {
        throw ValidationError("train: the image pipeline is RGB, the spec expects " +
                              std::to_string(spec.sequencer.input_channels) + " input channels");
    }

    const SplitResult split = balanced_split(manifest, config.per_class_train_count, config.seed);
    LoadedSplit train_data = load_split(split.train, spec.sequencer);
    LoadedSplit test_data = load_split(split.test, spec.sequencer);

    TrainResult result;
    if (!train_data.inputs.empty()) {
        result.stats = compute_normalization_stats(train_data.inputs);
        for (Tensor& img : train_data.inputs) img = normalize(img, result.stats);
        for (Tensor& img : test_data.inputs) img = normalize(img, result.stats);
    }

    TrainState state = TrainState::init(build<float>(spec, config.seed));
    const std::size_t sample_size =
        spec.sequencer.input_channels * spec.sequencer.input_h * spec.sequencer.input_w;

    const std::size_t train_size = train_data.inputs.size();
    std::vector<std::size_t> order(train_size);
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        state.epoch = epoch + 1;
        // Reproducible yet varying batch order per epoch.
        Rng shuffle_rng(config.seed + epoch);
        std::iota(order.begin(), order.end(), std::size_t{0});
        shuffle_rng.shuffle(order.begin(), order.end());

        double epoch_loss = 0.0;
        std::size_t epoch_steps = 0;
        for (std::size_t start = 0; start < train_size; start += config.batch_size) {
            const std::size_t count = std::min(config.batch_size, train_size - start);
            Tensor batch(Shape{count, spec.sequencer.input_channels, spec.sequencer.input_h,
                               spec.sequencer.input_w});
            std::vector<std::size_t> labels(count);
            for (std::size_t i = 0; i < count; ++i) {
                const std::size_t idx = order[start + i];
                std::copy(train_data.inputs[idx].data(), train_data.inputs[idx].data() + sample_size,
                          batch.data() + i * sample_size);
                labels[i] = static_cast<std::size_t>(train_data.labels[idx]);
            }

            const ForwardResultT<float> fwd = forward(state.model, batch);
            const SoftmaxLossResult<float> loss = softmax_cross_entropy(fwd.cache.logits, labels);
            const std::map<std::string, Tensor> grads =
                backward(state.model, fwd.cache, loss.grad_logits);
            sgd_step(state, grads, config);

            ++state.step;
            state.running_loss = loss.loss;
            epoch_loss += loss.loss;
            ++epoch_steps;
            result.step_losses.push_back(loss.loss);
            if (log) {
                *log << nlohmann::json{{"step", state.step},
                                       {"epoch", state.epoch},
                                       {"loss", loss.loss}}
                            .dump()
                     << "\n";
            }
        }

        EpochSummary summary;
        summary.epoch = state.epoch;
        summary.step = state.step;
        summary.mean_loss = epoch_steps ? epoch_loss / static_cast<double>(epoch_steps) : 0.0;
        if (has_both_classes(test_data.labels)) {
            summary.report = evaluate_tensors(state.model, test_data.inputs, test_data.labels);
        }
        if (log) {
            nlohmann::json line{{"step", state.step},
                                {"epoch", state.epoch},
                                {"loss", summary.mean_loss}};
            if (summary.report) {
                line["sensitivity"] = summary.report->sensitivity;
                line["specificity"] = summary.report->specificity;
            }
            *log << line.dump() << "\n";
        }
        result.epochs.push_back(std::move(summary));
    }

    result.model = std::move(state.model);
    return result;
}

}  // namespace radseq
