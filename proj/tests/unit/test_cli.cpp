#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "radseq/checkpoint.hpp"
#include "radseq/dataset.hpp"
#include "test_util.hpp"

using namespace radseq;
using testutil::TempDir;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CliResult run_cli(const TempDir& dir, const std::string& args) {
    const std::string out_path = dir.file("cli_stdout.txt");
    const std::string err_path = dir.file("cli_stderr.txt");
    const std::string cmd =
        std::string(RADSEQ_CLI_PATH) + " " + args + " > " + out_path + " 2> " + err_path;
    const int raw = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = slurp(out_path);
    r.err = slurp(err_path);
    return r;
}

}  // namespace

TEST_CASE("CLI end-to-end: split, train, eval, extract") {
    TempDir dir("cli");
    const DatasetManifest manifest = testutil::make_texture_dataset(dir, 6, 6, 40, 4242);
    const std::string manifest_path = dir.file("all.csv");
    save_manifest(manifest_path, manifest);

    // split
    const std::string train_csv = dir.file("train.csv");
    const std::string test_csv = dir.file("test.csv");
    CliResult r = run_cli(dir, "split --manifest " + manifest_path +
                                   " --per-class 4 --seed 3 --out-train " + train_csv +
                                   " --out-test " + test_csv);
    REQUIRE(r.exit_code == 0);
    CHECK(load_manifest(train_csv).records.size() == 8);
    CHECK(load_manifest(test_csv).records.size() == 4);

    // train (reduced architecture, tiny config)
    const std::string config_path = dir.file("config.json");
    {
        std::ofstream cfg(config_path);
        cfg << R"({"batch_size":4,"epochs":1,"per_class_train_count":4,"seed":5})";
    }
    const std::string ckpt = dir.file("model.ckpt");
    r = run_cli(dir, "train --manifest " + manifest_path + " --out " + ckpt + " --config " +
                         config_path + " --arch reduced");
    REQUIRE(r.exit_code == 0);
    CHECK(slurp(ckpt + ".stats.json").find("mean") != std::string::npos);

    // the training log is line-oriented JSON
    std::istringstream log(r.out);
    std::string line;
    std::size_t lines = 0;
    while (std::getline(log, line)) {
        const nlohmann::json j = nlohmann::json::parse(line);
        CHECK(j.contains("loss"));
        ++lines;
    }
    CHECK(lines >= 2);  // two steps plus the epoch summary

    // eval prints an EvalReport JSON to stdout
    r = run_cli(dir, "eval --manifest " + test_csv + " --ckpt " + ckpt + " --split test");
    REQUIRE(r.exit_code == 0);
    const nlohmann::json report = nlohmann::json::parse(r.out);
    CHECK(report["split"] == "test");
    CHECK(report["confusion"].contains("tp"));
    CHECK(report["counts"]["benign"].get<int>() + report["counts"]["malignant"].get<int>() == 4);

    // extract writes an 8-byte length header plus 32-bit values
    const std::string seq_path = dir.file("seq.bin");
    r = run_cli(dir, "extract --image " + manifest.records[0].path + " --ckpt " + ckpt +
                         " --out " + seq_path);
    REQUIRE(r.exit_code == 0);
    const std::string blob = slurp(seq_path);
    REQUIRE(blob.size() == 8 + 128 * 4);
    std::uint64_t count = 0;
    for (std::size_t i = 0; i < 8; ++i) {
        count |= static_cast<std::uint64_t>(static_cast<unsigned char>(blob[i])) << (8 * i);
    }
    CHECK(count == 128);
}

TEST_CASE("CLI exit codes: 1 for validation errors, 2 for data errors") {
    TempDir dir("cli_err");
    const DatasetManifest manifest = testutil::make_texture_dataset(dir, 2, 2, 40, 1);
    const std::string manifest_path = dir.file("all.csv");
    save_manifest(manifest_path, manifest);

    // validation: unknown split value needs a checkpoint first
    const std::string ckpt = dir.file("m.ckpt");
    save_checkpoint(ckpt, build<float>(reduced_spec(), 0), NormalizationStats{});
    CliResult r = run_cli(dir, "eval --manifest " + manifest_path + " --ckpt " + ckpt +
                                   " --split bogus");
    CHECK(r.exit_code == 1);

    // validation: insufficient records per class
    r = run_cli(dir, "split --manifest " + manifest_path +
                         " --per-class 99 --seed 1 --out-train " + dir.file("t.csv") +
                         " --out-test " + dir.file("e.csv"));
    CHECK(r.exit_code == 1);

    // data error: missing checkpoint file
    r = run_cli(dir, "eval --manifest " + manifest_path + " --ckpt " + dir.file("absent.ckpt") +
                         " --split test");
    CHECK(r.exit_code == 2);

    // data error: missing manifest
    r = run_cli(dir, "split --manifest " + dir.file("absent.csv") +
                         " --per-class 1 --seed 1 --out-train " + dir.file("t2.csv") +
                         " --out-test " + dir.file("e2.csv"));
    CHECK(r.exit_code == 2);

    // usage error from the parser
    r = run_cli(dir, "train");
    CHECK(r.exit_code == 1);
}

TEST_CASE("CLI gradcheck passes at the reduced scale") {
    TempDir dir("cli_gc");
    const CliResult r = run_cli(dir, "gradcheck --scale reduced");
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("PASS network") != std::string::npos);
    CHECK(r.out.find("FAIL") == std::string::npos);

    CHECK(run_cli(dir, "gradcheck --scale full").exit_code == 1);
}
