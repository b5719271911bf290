#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "radseq/dataset.hpp"
#include "radseq/image.hpp"
#include "radseq/metrics.hpp"
#include "radseq/sequencer.hpp"

namespace radseq {

struct TrainConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    std::size_t batch_size = 32;
    std::size_t epochs = 1;
    std::uint64_t seed = 0;
    std::size_t per_class_train_count = 473;
    double weight_decay = 0.0;

    void validate() const;

    /// Keys mirror the field names exactly; unknown keys are rejected.
    static TrainConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct TrainState {
    SequencerModel model;
    std::map<std::string, Tensor> velocity;  // shapes mirror the parameters
    std::size_t epoch = 0;
    std::size_t step = 0;
    double running_loss = 0.0;

    static TrainState init(SequencerModel model);
};

/// Classic momentum update applied to every parameter:
///   velocity <- momentum * velocity - lr * (grad + weight_decay * param)
///   param    <- param + velocity
/// Bumps the model revision so stale forward caches are rejected.
void sgd_step(TrainState& state, const std::map<std::string, Tensor>& gradients,
              const TrainConfig& config);

struct EpochSummary {
    std::size_t epoch = 0;       // 1-based
    std::size_t step = 0;        // last step of the epoch
    double mean_loss = 0.0;
    std::optional<EvalReport> report;  // absent when the test split lacks a class
};

struct TrainResult {
    SequencerModel model;
    NormalizationStats stats;
    std::vector<double> step_losses;
    std::vector<EpochSummary> epochs;
};

/// Balanced-train protocol: samples per_class_train_count records per class
/// for training (seeded, without replacement), leaves the imbalanced rest as
/// the test split, and runs seeded-shuffle mini-batch epochs of
/// forward -> cross-entropy -> backward -> sgd_step. Normalization stats
/// come from the training split only. Emits one JSON object per line to
/// `log` when given: {"step","epoch","loss"} per step plus sensitivity and
/// specificity on the end-of-epoch line. Unreadable images abort the run
/// with the offending path.
TrainResult train(const DatasetManifest& manifest, const ModelSpec& spec,
                  const TrainConfig& config, std::ostream* log = nullptr);

}  // namespace radseq
