#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "radseq/dataset.hpp"
#include "radseq/rng.hpp"
#include "test_util.hpp"

using namespace radseq;
using testutil::TempDir;

namespace {

std::string write_text(const TempDir& dir, const std::string& name, const std::string& text) {
    const std::string path = dir.file(name);
    std::ofstream out(path, std::ios::binary);
    out << text;
    return path;
}

DatasetManifest synthetic_manifest(std::size_t benign, std::size_t malignant) {
    DatasetManifest m;
    for (std::size_t i = 0; i < benign; ++i) {
        m.records.push_back({"b" + std::to_string(i) + ".ppm", kBenign});
    }
    for (std::size_t i = 0; i < malignant; ++i) {
        m.records.push_back({"m" + std::to_string(i) + ".ppm", kMalignant});
    }
    return m;
}

}  // namespace

TEST_CASE("load_manifest: format definition") {
    TempDir dir("manifest");
    const std::string path = write_text(dir, "m.csv", "path,label\na.ppm,benign\n");
    DatasetManifest m = load_manifest(path);
    REQUIRE(m.records.size() == 1);
    CHECK(m.records[0].label == kBenign);
    // relative paths resolve against the manifest's directory
    CHECK(m.records[0].path == dir.file("a.ppm"));
}

TEST_CASE("load_manifest: error contracts") {
    TempDir dir("manifest_bad");
    SUBCASE("unknown label names the line") {
        const std::string path =
            write_text(dir, "m.csv", "path,label\na.ppm,benign\nb.ppm,melanoma\n");
        CHECK_THROWS_WITH_AS(load_manifest(path), doctest::Contains("line 3"), DataError);
    }
    SUBCASE("duplicate path") {
        const std::string path =
            write_text(dir, "m.csv", "path,label\na.ppm,benign\na.ppm,malignant\n");
        CHECK_THROWS_WITH_AS(load_manifest(path), doctest::Contains("duplicate"), ValidationError);
    }
    SUBCASE("bad header") {
        const std::string path = write_text(dir, "m.csv", "file,class\na.ppm,benign\n");
        CHECK_THROWS_AS(load_manifest(path), DataError);
    }
    SUBCASE("CRLF line endings") {
        const std::string path = write_text(dir, "m.csv", "path,label\r\na.ppm,benign\r\n");
        CHECK_THROWS_WITH_AS(load_manifest(path), doctest::Contains("LF"), DataError);
    }
    SUBCASE("missing line structure") {
        const std::string path = write_text(dir, "m.csv", "path,label\njust-a-path\n");
        CHECK_THROWS_AS(load_manifest(path), DataError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_manifest(dir.file("nope.csv")), DataError);
    }
}

TEST_CASE("save_manifest round-trips through load_manifest") {
    TempDir dir("manifest_rt");
    DatasetManifest m;
    m.records.push_back({dir.file("x.ppm"), kBenign});
    m.records.push_back({dir.file("y.ppm"), kMalignant});
    const std::string path = dir.file("m.csv");
    save_manifest(path, m);

    const DatasetManifest back = load_manifest(path);
    REQUIRE(back.records.size() == 2);
    CHECK(back.records[0].path == m.records[0].path);
    CHECK(back.records[0].label == kBenign);
    CHECK(back.records[1].label == kMalignant);

    // written relative to the manifest's directory
    std::ifstream in(path);
    std::string header, line1;
    std::getline(in, header);
    std::getline(in, line1);
    CHECK(line1 == "x.ppm,benign");
}

TEST_CASE("balanced_split: small instance checked exhaustively") {
    const DatasetManifest m = synthetic_manifest(6, 4);
    const SplitResult split = balanced_split(m, 2, 42);

    CHECK(split.train.records.size() == 4);
    CHECK(split.test.records.size() == 6);

    std::size_t train_benign = 0, train_malignant = 0;
    for (const DatasetRecord& r : split.train.records) {
        (r.label == kBenign ? train_benign : train_malignant) += 1;
    }
    CHECK(train_benign == 2);
    CHECK(train_malignant == 2);

    // disjoint and exhaustive
    std::set<std::string> train_paths, test_paths;
    for (const DatasetRecord& r : split.train.records) train_paths.insert(r.path);
    for (const DatasetRecord& r : split.test.records) test_paths.insert(r.path);
    CHECK(train_paths.size() == 4);
    CHECK(test_paths.size() == 6);
    for (const std::string& p : train_paths) CHECK(test_paths.count(p) == 0);
    std::set<std::string> all = train_paths;
    all.insert(test_paths.begin(), test_paths.end());
    CHECK(all.size() == m.records.size());
}

TEST_CASE("balanced_split: n = 0 and insufficient records") {
    const DatasetManifest m = synthetic_manifest(3, 2);
    const SplitResult empty_train = balanced_split(m, 0, 1);
    CHECK(empty_train.train.records.empty());
    CHECK(empty_train.test.records.size() == m.records.size());

    CHECK_THROWS_WITH_AS(balanced_split(m, 3, 1), doctest::Contains("malignant"), ValidationError);
}

TEST_CASE("balanced_split: deterministic per seed, varies across seeds") {
    const DatasetManifest m = synthetic_manifest(30, 30);
    const SplitResult a = balanced_split(m, 10, 7);
    const SplitResult b = balanced_split(m, 10, 7);
    REQUIRE(a.train.records.size() == b.train.records.size());
    for (std::size_t i = 0; i < a.train.records.size(); ++i) {
        CHECK(a.train.records[i] == b.train.records[i]);
    }

    bool any_difference = false;
    for (std::uint64_t seed = 8; seed < 12 && !any_difference; ++seed) {
        const SplitResult c = balanced_split(m, 10, seed);
        for (std::size_t i = 0; i < a.train.records.size(); ++i) {
            if (!(a.train.records[i] == c.train.records[i])) {
                any_difference = true;
                break;
            }
        }
    }
    CHECK(any_difference);
}

TEST_CASE("balanced_split partition property over random manifests") {
    Rng rng(1001);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t benign = 1 + rng.below(40);
        const std::size_t malignant = 1 + rng.below(40);
        const DatasetManifest m = synthetic_manifest(benign, malignant);
        const std::size_t n = rng.below(std::min(benign, malignant) + 1);

        const SplitResult split = balanced_split(m, n, rng.next_u64());
        CHECK(split.train.records.size() == 2 * n);
        CHECK(split.train.records.size() + split.test.records.size() == m.records.size());

        std::size_t tb = 0, tm = 0;
        for (const DatasetRecord& r : split.train.records) {
            (r.label == kBenign ? tb : tm) += 1;
        }
        CHECK(tb == n);
        CHECK(tm == n);

        std::set<std::string> seen;
        for (const DatasetRecord& r : split.train.records) seen.insert(r.path);
        for (const DatasetRecord& r : split.test.records) seen.insert(r.path);
        CHECK(seen.size() == m.records.size());
    }
}

TEST_CASE("archive-scale protocol: 9,152 records split 473 per class") {
    // 8,522 benign + 630 malignant, as in the tested archive
    const DatasetManifest m = synthetic_manifest(8522, 630);
    const SplitResult split = balanced_split(m, 473, 3);
    CHECK(split.train.records.size() == 946);
    CHECK(split.test.records.size() == 8206);

    std::size_t benign = 0, malignant = 0;
    for (const DatasetRecord& r : split.test.records) {
        (r.label == kBenign ? benign : malignant) += 1;
    }
    CHECK(benign == 8049);
    CHECK(malignant == 157);
}

TEST_CASE("archive-shaped manifest loads from CSV and splits to 8049/157") {
    TempDir dir("manifest_archive");
    std::string csv = "path,label\n";
    for (std::size_t i = 0; i < 8522; ++i) csv += "b" + std::to_string(i) + ".ppm,benign\n";
    for (std::size_t i = 0; i < 630; ++i) csv += "m" + std::to_string(i) + ".ppm,malignant\n";
    const std::string path = write_text(dir, "archive.csv", csv);

    const DatasetManifest m = load_manifest(path);
    REQUIRE(m.records.size() == 9152);
    const SplitResult split = balanced_split(m, 473, 11);
    std::size_t benign = 0, malignant = 0;
    for (const DatasetRecord& r : split.test.records) {
        (r.label == kBenign ? benign : malignant) += 1;
    }
    CHECK(benign == 8049);
    CHECK(malignant == 157);
}
