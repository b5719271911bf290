#include <doctest.h>

#include <algorithm>

#include "radseq/metrics.hpp"
#include "radseq/rng.hpp"
#include "test_util.hpp"

using namespace radseq;
using testutil::TempDir;

TEST_CASE("confusion: hand tallies") {
    SUBCASE("all malignant, all correct") {
        const std::vector<int> v(5, kMalignant);
        const ConfusionMatrix cm = confusion(v, v);
        CHECK(cm.tp == 5);
        CHECK(cm.fp == 0);
        CHECK(cm.tn == 0);
        CHECK(cm.fn == 0);
    }
    SUBCASE("mixed case") {
        const ConfusionMatrix cm = confusion({1, 0, 0, 1}, {1, 1, 0, 0});
        CHECK(cm.tp == 1);
        CHECK(cm.fn == 1);
        CHECK(cm.tn == 1);
        CHECK(cm.fp == 1);
    }
    SUBCASE("empty inputs") {
        const ConfusionMatrix cm = confusion({}, {});
        CHECK(cm == ConfusionMatrix{});
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(confusion({0}, {0, 1}), ValidationError);
        CHECK_THROWS_AS(confusion({2}, {0}), ValidationError);
    }
}

TEST_CASE("sensitivity and specificity formulas") {
    ConfusionMatrix perfect{/*tp=*/5, /*fp=*/0, /*tn=*/7, /*fn=*/0};
    CHECK(sensitivity(perfect) == 1.0);
    CHECK(specificity(perfect) == 1.0);

    // the worked example consistent with the reported 91% / 75%
    ConfusionMatrix worked{/*tp=*/143, /*fp=*/2012, /*tn=*/6037, /*fn=*/14};
    CHECK(sensitivity(worked) == doctest::Approx(143.0 / 157.0));
    CHECK(sensitivity(worked) == doctest::Approx(0.9108).epsilon(1e-3));
    CHECK(specificity(worked) == doctest::Approx(6037.0 / 8049.0));
    CHECK(specificity(worked) == doctest::Approx(0.7500).epsilon(1e-3));

    ConfusionMatrix no_positives{0, 3, 4, 0};
    CHECK_THROWS_AS(sensitivity(no_positives), ValidationError);
    ConfusionMatrix no_negatives{2, 0, 0, 1};
    CHECK_THROWS_AS(specificity(no_negatives), ValidationError);
}

TEST_CASE("metrics equal a naive re-count on 1,000 randomized vectors") {
    Rng rng(55);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng.below(50);
        std::vector<int> predictions(n), labels(n);
        bool has_pos = false, has_neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            predictions[i] = static_cast<int>(rng.below(2));
            labels[i] = static_cast<int>(rng.below(2));
            (labels[i] == 1 ? has_pos : has_neg) = true;
        }
        const ConfusionMatrix cm = confusion(predictions, labels);

        std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (labels[i] == 1 && predictions[i] == 1) ++tp;
            if (labels[i] == 1 && predictions[i] == 0) ++fn;
            if (labels[i] == 0 && predictions[i] == 0) ++tn;
            if (labels[i] == 0 && predictions[i] == 1) ++fp;
        }
        CHECK(cm.tp == tp);
        CHECK(cm.fp == fp);
        CHECK(cm.tn == tn);
        CHECK(cm.fn == fn);
        if (has_pos) CHECK(sensitivity(cm) == static_cast<double>(tp) / (tp + fn));
        if (has_neg) CHECK(specificity(cm) == static_cast<double>(tn) / (tn + fp));
    }
}

TEST_CASE("metrics are permutation-invariant in record order") {
    Rng rng(66);
    std::vector<int> predictions(40), labels(40);
    for (std::size_t i = 0; i < 40; ++i) {
        predictions[i] = static_cast<int>(rng.below(2));
        labels[i] = static_cast<int>(rng.below(2));
    }
    const ConfusionMatrix base = confusion(predictions, labels);

    std::vector<std::size_t> order(40);
    for (std::size_t i = 0; i < 40; ++i) order[i] = i;
    rng.shuffle(order.begin(), order.end());
    std::vector<int> p2(40), l2(40);
    for (std::size_t i = 0; i < 40; ++i) {
        p2[i] = predictions[order[i]];
        l2[i] = labels[order[i]];
    }
    CHECK(confusion(p2, l2) == base);
}

TEST_CASE("evaluate matches an independent per-record tally") {
    TempDir dir("eval");
    const DatasetManifest manifest = testutil::make_texture_dataset(dir, 12, 8, 40, 2024);
    const SequencerModel model = build<float>(reduced_spec(), 5);
    NormalizationStats stats;
    stats.mean = {0.5f, 0.5f, 0.5f};
    stats.std = {0.3f, 0.3f, 0.3f};

    const EvalReport report = evaluate(model, manifest, stats);
    CHECK(report.benign_count == 12);
    CHECK(report.malignant_count == 8);
    CHECK(report.confusion.tp + report.confusion.fn == 8);
    CHECK(report.confusion.tn + report.confusion.fp == 12);

    // Brute-force oracle: one record at a time, tallied by hand.
    std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (const DatasetRecord& rec : manifest.records) {
        Tensor img = decode_image(rec.path);
        img = normalize(resize_bilinear(img, 40, 40), stats);
        const ForwardResultT<float> r = forward(model, img.reshaped({1, 3, 40, 40}));
        const int pred = r.probabilities[1] > r.probabilities[0] ? kMalignant : kBenign;
        if (rec.label == kMalignant) {
            (pred == kMalignant ? tp : fn) += 1;
        } else {
            (pred == kBenign ? tn : fp) += 1;
        }
    }
    CHECK(report.confusion.tp == tp);
    CHECK(report.confusion.fp == fp);
    CHECK(report.confusion.tn == tn);
    CHECK(report.confusion.fn == fn);
    CHECK(report.sensitivity == static_cast<double>(tp) / (tp + fn));
    CHECK(report.specificity == static_cast<double>(tn) / (tn + fp));
}

TEST_CASE("constant-benign predictor: sensitivity 0, specificity 1") {
    TempDir dir("eval_const");
    const DatasetManifest manifest = testutil::make_texture_dataset(dir, 4, 4, 40, 31);
    SequencerModel model = build<float>(reduced_spec(), 5);
    for (auto& [name, tensor] : model.params) {
        tensor = Tensor(tensor.shape());  // all-zero parameters: probability ties
    }
    // ties break toward benign
    const EvalReport report = evaluate(model, manifest, NormalizationStats{});
    CHECK(report.confusion.tp == 0);
    CHECK(report.confusion.fn == 4);
    CHECK(report.confusion.tn == 4);
    CHECK(report.confusion.fp == 0);
    CHECK(report.sensitivity == 0.0);
    CHECK(report.specificity == 1.0);
}

TEST_CASE("evaluate propagates pipeline errors with the record path") {
    DatasetManifest manifest;
    manifest.records.push_back({"/nonexistent/image.ppm", kBenign});
    manifest.records.push_back({"/nonexistent/image2.ppm", kMalignant});
    const SequencerModel model = build<float>(reduced_spec(), 5);
    CHECK_THROWS_WITH_AS(evaluate(model, manifest, NormalizationStats{}),
                         doctest::Contains("/nonexistent/image.ppm"), DataError);
}

TEST_CASE("report JSON carries the confusion matrix and both metrics") {
    EvalReport report;
    report.confusion = {143, 2012, 6037, 14};
    report.sensitivity = 143.0 / 157.0;
    report.specificity = 6037.0 / 8049.0;
    report.benign_count = 8049;
    report.malignant_count = 157;
    const nlohmann::json j = report_to_json(report);
    CHECK(j["confusion"]["tp"] == 143);
    CHECK(j["confusion"]["fn"] == 14);
    CHECK(j["counts"]["benign"] == 8049);
    CHECK(j["sensitivity"].get<double>() == doctest::Approx(0.9108).epsilon(1e-3));
    CHECK(j["specificity"].get<double>() == doctest::Approx(0.75).epsilon(1e-3));
}
