#include <cstdint>
#include <cstring>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "radseq/checkpoint.hpp"
#include "radseq/dataset.hpp"
#include "radseq/gradcheck.hpp"
#include "radseq/image.hpp"
#include "radseq/metrics.hpp"
#include "radseq/sequencer.hpp"
#include "radseq/training.hpp"

namespace {

using namespace radseq;

ModelSpec spec_for_arch(const std::string& arch) {
    if (arch == "full") return default_spec();
    if (arch == "reduced") return reduced_spec();
    throw ValidationError("unknown architecture '" + arch + "' (expected full or reduced)");
}

void write_stats_file(const std::string& path, const NormalizationStats& stats) {
    nlohmann::json j{{"mean", {stats.mean[0], stats.mean[1], stats.mean[2]}},
                     {"std", {stats.std[0], stats.std[1], stats.std[2]}}};
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << j.dump() << "\n";
    if (!out) throw DataError("write failed for '" + path + "'");
}

int cmd_train(const std::string& manifest_path, const std::string& out_path,
              const std::string& config_path, bool seed_given, std::uint64_t seed,
              const std::string& arch) {
    TrainConfig config;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw DataError("cannot open config '" + config_path + "'");
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError("config '" + config_path + "': " + e.what());
        }
        config = TrainConfig::from_json(j);
    }
    if (seed_given) config.seed = seed;

    const DatasetManifest manifest = load_manifest(manifest_path);
    const ModelSpec spec = spec_for_arch(arch);
    const TrainResult result = train(manifest, spec, config, &std::cout);

    save_checkpoint(out_path, result.model, result.stats);
    write_stats_file(out_path + ".stats.json", result.stats);
    std::cerr << "checkpoint written to " << out_path << "\n";
    return 0;
}

int cmd_eval(const std::string& manifest_path, const std::string& ckpt_path,
             const std::string& split) {
    if (split != "train" && split != "test" && split != "all") {
        throw ValidationError("--split must be train, test, or all; got '" + split + "'");
    }
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const DatasetManifest manifest = load_manifest(manifest_path);
    const EvalReport report = evaluate(ckpt.model, manifest, ckpt.stats);
    nlohmann::json j = report_to_json(report);
    j["split"] = split;
    std::cout << j.dump() << "\n";
    return 0;
}

int cmd_extract(const std::string& image_path, const std::string& ckpt_path,
                const std::string& out_path) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const SequencerSpec& s = ckpt.model.spec.sequencer;
    Tensor image = decode_image(image_path);
    image = resize_bilinear(image, s.input_h, s.input_w);
    image = normalize(image, ckpt.stats);
    const RadiomicSequence seq = extract_sequence(ckpt.model, image);

    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + out_path + "' for writing");
    // 8-byte little-endian element count, then 32-bit little-endian values.
    const std::uint64_t count = seq.values.size();
    unsigned char header[8];
    for (std::size_t i = 0; i < 8; ++i) {
        header[i] = static_cast<unsigned char>((count >> (8 * i)) & 0xFF);
    }
    out.write(reinterpret_cast<const char*>(header), 8);
    for (float v : seq.values) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, sizeof(bits));
        unsigned char b[4];
        for (std::size_t i = 0; i < 4; ++i) {
            b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFF);
        }
        out.write(reinterpret_cast<const char*>(b), 4);
    }
    if (!out) throw DataError("write failed for '" + out_path + "'");
    std::cerr << "wrote " << count << " sequence values to " << out_path << "\n";
    return 0;
}

int cmd_gradcheck(const std::string& scale) {
    if (scale != "reduced") {
        throw ValidationError("--scale supports only 'reduced', got '" + scale + "'");
    }
    const GradCheckOptions opt;
    bool ok = true;
    for (const GradCheckResult& r : run_kernel_gradient_checks(opt)) {
        const bool pass = r.pass(opt);
        ok = ok && pass;
        std::cout << (pass ? "PASS" : "FAIL") << " " << r.name << ": max_rel_err=" << r.max_rel_err
                  << " (" << r.checked << " coordinates)\n";
    }
    const GradCheckResult net = run_network_gradient_check(reduced_spec(), opt);
    const bool net_pass = net.pass(opt);
    ok = ok && net_pass;
    std::cout << (net_pass ? "PASS" : "FAIL") << " " << net.name
              << ": max_rel_err=" << net.max_rel_err << " (" << net.checked << " coordinates)\n";
    return ok ? 0 : 1;
}

int cmd_split(const std::string& manifest_path, std::size_t per_class, std::uint64_t seed,
              const std::string& out_train, const std::string& out_test) {
    const DatasetManifest manifest = load_manifest(manifest_path);
    const SplitResult split = balanced_split(manifest, per_class, seed);
    save_manifest(out_train, split.train);
    save_manifest(out_test, split.test);
    std::cerr << "train: " << split.train.records.size() << " records, test: "
              << split.test.records.size() << " records\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"radseq: deep multi-column radiomic sequencer"};
    app.require_subcommand(1);

    // train
    auto* train_cmd = app.add_subcommand("train", "discover a sequencer from a manifest");
    std::string train_manifest, train_out, train_config, train_arch = "full";
    std::uint64_t train_seed = 0;
    train_cmd->add_option("--manifest", train_manifest, "dataset manifest CSV")->required();
    train_cmd->add_option("--out", train_out, "output checkpoint path")->required();
    train_cmd->add_option("--config", train_config, "training config JSON");
    auto* seed_opt = train_cmd->add_option("--seed", train_seed, "seed override");
    train_cmd->add_option("--arch", train_arch, "architecture: full or reduced");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a manifest");
    std::string eval_manifest, eval_ckpt, eval_split = "test";
    eval_cmd->add_option("--manifest", eval_manifest, "manifest CSV of the split")->required();
    eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint path")->required();
    eval_cmd->add_option("--split", eval_split, "split name for the report");

    // extract
    auto* extract_cmd = app.add_subcommand("extract", "extract a radiomic sequence for one image");
    std::string extract_image, extract_ckpt, extract_out;
    extract_cmd->add_option("--image", extract_image, "input image")->required();
    extract_cmd->add_option("--ckpt", extract_ckpt, "checkpoint path")->required();
    extract_cmd->add_option("--out", extract_out, "output binary path")->required();

    // gradcheck
    auto* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    std::string gradcheck_scale = "reduced";
    gradcheck_cmd->add_option("--scale", gradcheck_scale, "network scale (reduced)");

    // split
    auto* split_cmd = app.add_subcommand("split", "balanced train / imbalanced test split");
    std::string split_manifest, split_out_train, split_out_test;
    std::size_t split_per_class = 473;
    std::uint64_t split_seed = 0;
    split_cmd->add_option("--manifest", split_manifest, "dataset manifest CSV")->required();
    split_cmd->add_option("--per-class", split_per_class, "train records per class")->required();
    split_cmd->add_option("--seed", split_seed, "sampling seed");
    split_cmd->add_option("--out-train", split_out_train, "train manifest output")->required();
    split_cmd->add_option("--out-test", split_out_test, "test manifest output")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*train_cmd) {
            return cmd_train(train_manifest, train_out, train_config, seed_opt->count() > 0,
                             train_seed, train_arch);
        }
        if (*eval_cmd) return cmd_eval(eval_manifest, eval_ckpt, eval_split);
        if (*extract_cmd) return cmd_extract(extract_image, extract_ckpt, extract_out);
        if (*gradcheck_cmd) return cmd_gradcheck(gradcheck_scale);
        if (*split_cmd) {
            return cmd_split(split_manifest, split_per_class, split_seed, split_out_train,
                             split_out_test);
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
