#include "radseq/metrics.hpp"

#include <algorithm>

namespace radseq {

ConfusionMatrix confusion(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.size() != labels.size()) {
        throw ValidationError("confusion: " + std::to_string(predictions.size()) +
                              " predictions for " + std::to_string(labels.size()) + " labels");
    }
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int p = predictions[i];
        const int l = labels[i];
        if ((p != kBenign && p != kMalignant) || (l != kBenign && l != kMalignant)) {
            throw ValidationError("confusion: class values must be 0 or 1 (index " +
                                  std::to_string(i) + ")");
        }
        if (l == kMalignant) {
            p == kMalignant ? ++cm.tp : ++cm.fn;
        } else {
            p == kBenign ? ++cm.tn : ++cm.fp;
        }
    }
    return cm;
}

double sensitivity(const ConfusionMatrix& cm) {
    const std::uint64_t positives = cm.tp + cm.fn;
    if (positives == 0) {
        throw ValidationError("sensitivity is undefined: no malignant cases in the split");
    }
    return static_cast<double>(cm.tp) / static_cast<double>(positives);
}

double specificity(const ConfusionMatrix& cm) {
    const std::uint64_t negatives = cm.tn + cm.fp;
    if (negatives == 0) {
        throw ValidationError("specificity is undefined: no benign cases in the split");
    }
    return static_cast<double>(cm.tn) / static_cast<double>(negatives);
}

EvalReport evaluate_tensors(const SequencerModel& model, const std::vector<Tensor>& inputs,
                            const std::vector<int>& labels) {
    if (inputs.size() != labels.size()) {
        throw ValidationError("evaluate: " + std::to_string(inputs.size()) + " inputs for " +
                              std::to_string(labels.size()) + " labels");
    }
    if (model.spec.head.class_count != 2) {
        throw ValidationError("evaluate: the benign/malignant report requires a 2-class head, got " +
                              std::to_string(model.spec.head.class_count));
    }
    const SequencerSpec& s = model.spec.sequencer;
    const std::size_t kBatch = 16;

    std::vector<int> predictions;
    predictions.reserve(inputs.size());
    for (std::size_t start = 0; start < inputs.size(); start += kBatch) {
        const std::size_t count = std::min(kBatch, inputs.size() - start);
        Tensor batch(Shape{count, s.input_channels, s.input_h, s.input_w});
        const std::size_t sample = s.input_channels * s.input_h * s.input_w;
        for (std::size_t i = 0; i < count; ++i) {
            const Tensor& img = inputs[start + i];
            if (img.size() != sample) {
                throw DimensionError("evaluate: input " + std::to_string(start + i) + " is " +
                                     shape_string(img.shape()) + ", expected " +
                                     shape_string({s.input_channels, s.input_h, s.input_w}));
            }
            std::copy(img.data(), img.data() + sample, batch.data() + i * sample);
        }
        const ForwardResultT<float> r = forward(model, batch);
        for (std::size_t i = 0; i < count; ++i) {
            const float benign_p = r.probabilities(i, std::size_t{0});
            const float malignant_p = r.probabilities(i, std::size_t{1});
            // Ties go to benign.
            predictions.push_back(malignant_p > benign_p ? kMalignant : kBenign);
        }
    }

    EvalReport report;
    report.confusion = confusion(predictions, labels);
    report.sensitivity = sensitivity(report.confusion);
    report.specificity = specificity(report.confusion);
    report.malignant_count = report.confusion.tp + report.confusion.fn;
    report.benign_count = report.confusion.tn + report.confusion.fp;
    return report;
}

EvalReport evaluate(const SequencerModel& model, const DatasetManifest& split,
                    const NormalizationStats& stats) {
    if (model.spec.head.class_count != 2) {
        throw ValidationError("evaluate: the benign/malignant report requires a 2-class head, got " +
                              std::to_string(model.spec.head.class_count));
    }
    const SequencerSpec& s = model.spec.sequencer;
    if (s.input_channels != 3) {
        throw ValidationError("evaluate: the image pipeline is RGB, the model expects " +
                              std::to_string(s.input_channels) + " channels");
    }
    const std::size_t kBatch = 16;
    const std::size_t sample = s.input_channels * s.input_h * s.input_w;

    // Stream the split in small batches so a large test split never has to
    // live in memory at once.
    std::vector<int> predictions;
    std::vector<int> labels;
    predictions.reserve(split.records.size());
    labels.reserve(split.records.size());
    for (std::size_t start = 0; start < split.records.size(); start += kBatch) {
        const std::size_t count = std::min(kBatch, split.records.size() - start);
        Tensor batch(Shape{count, s.input_channels, s.input_h, s.input_w});
        for (std::size_t i = 0; i < count; ++i) {
            const DatasetRecord& rec = split.records[start + i];
            try {
                Tensor img = decode_image(rec.path);
                img = normalize(resize_bilinear(img, s.input_h, s.input_w), stats);
                std::copy(img.data(), img.data() + sample, batch.data() + i * sample);
            } catch (const DataError& e) {
                throw DataError("evaluate: record '" + rec.path + "': " + e.what());
            }
            labels.push_back(rec.label);
        }
        const ForwardResultT<float> r = forward(model, batch);
        for (std::size_t i = 0; i < count; ++i) {
            const float benign_p = r.probabilities(i, std::size_t{0});
            const float malignant_p = r.probabilities(i, std::size_t{1});
            predictions.push_back(malignant_p > benign_p ? kMalignant : kBenign);
        }
    }

    EvalReport report;
    report.confusion = confusion(predictions, labels);
    report.sensitivity = sensitivity(report.confusion);
    report.specificity = specificity(report.confusion);
    report.malignant_count = report.confusion.tp + report.confusion.fn;
    report.benign_count = report.confusion.tn + report.confusion.fp;
    return report;
}

nlohmann::json report_to_json(const EvalReport& report) {
    return nlohmann::json{
        {"confusion",
         {{"tp", report.confusion.tp},
          {"fp", report.confusion.fp},
          {"tn", report.confusion.tn},
          {"fn", report.confusion.fn}}},
        {"sensitivity", report.sensitivity},
        {"specificity", report.specificity},
        {"counts", {{"benign", report.benign_count}, {"malignant", report.malignant_count}}},
    };
}

}  // namespace radseq
