#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "radseq/dataset.hpp"
#include "radseq/image.hpp"
#include "radseq/sequencer.hpp"

namespace radseq {

/// Binary confusion counts with malignant as the positive class.
struct ConfusionMatrix {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fn = 0;
    bool operator==(const ConfusionMatrix&) const = default;
};

/// Tallies predictions against labels; values must be 0 (benign) or
/// 1 (malignant) and the vectors equally long.
ConfusionMatrix confusion(const std::vector<int>& predictions, const std::vector<int>& labels);

/// tp / (tp + fn). Throws ValidationError when there are no positives.
double sensitivity(const ConfusionMatrix& cm);

/// tn / (tn + fp). Throws ValidationError when there are no negatives.
double specificity(const ConfusionMatrix& cm);

struct EvalReport {
    ConfusionMatrix confusion;
    double sensitivity = 0.0;
    double specificity = 0.0;
    std::uint64_t benign_count = 0;
    std::uint64_t malignant_count = 0;
};

/// Runs decode -> resize -> normalize -> forward -> argmax per record and
/// aggregates the report. Probability ties go to benign. Pipeline errors
/// propagate with the offending record path.
EvalReport evaluate(const SequencerModel& model, const DatasetManifest& split,
                    const NormalizationStats& stats);

/// Report over already-preprocessed input tensors (one CxHxW tensor per
/// label); shared by evaluate() and the training loop's epoch-end report.
EvalReport evaluate_tensors(const SequencerModel& model, const std::vector<Tensor>& inputs,
                            const std::vector<int>& labels);

nlohmann::json report_to_json(const EvalReport& report);

}  // namespace radseq
