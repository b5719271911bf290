#include "radseq/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <unordered_set>

#include "radseq/rng.hpp"

namespace fs = std::filesystem;

namespace radseq {

const char* label_name(int label) {
    switch (label) {
        case kBenign: return "benign";
        case kMalignant: return "malignant";
    }
    throw ValidationError("label must be 0 (benign) or 1 (malignant), got " +
                          std::to_string(label));
}

int parse_label(const std::string& name) {
    if (name == "benign") return kBenign;
    if (name == "malignant") return kMalignant;
    throw ValidationError("unknown label '" + name + "' (expected benign or malignant)");
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open manifest '" + path + "'");

    const fs::path base = fs::path(path).parent_path();
    DatasetManifest manifest;
    manifest.provenance = path;

    std::string line;
    std::size_t line_no = 0;
    std::unordered_set<std::string> seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            throw DataError("manifest '" + path + "' line " + std::to_string(line_no) +
                            ": CRLF line ending (the format requires LF)");
        }
        if (line_no == 1) {
            if (line != "path,label") {
                throw DataError("manifest '" + path + "': header must be exactly \"path,label\", got \"" +
                                line + "\"");
            }
            continue;
        }
        if (line.empty()) continue;  // tolerate blank lines

        const std::size_t comma = line.rfind(',');
        if (comma == std::string::npos || comma == 0) {
            throw DataError("manifest '" + path + "' line " + std::to_string(line_no) +
                            ": expected \"path,label\"");
        }
        std::string rec_path = line.substr(0, comma);
        const std::string label_str = line.substr(comma + 1);

        int label = 0;
        try {
            label = parse_label(label_str);
        } catch (const ValidationError& e) {
            throw DataError("manifest '" + path + "' line " + std::to_string(line_no) + ": " +
                            e.what());
        }

        if (!seen.insert(rec_path).second) {
            throw ValidationError("manifest '" + path + "' line " + std::to_string(line_no) +
                                  ": duplicate path '" + rec_path + "'");
        }

        fs::path p(rec_path);
        if (p.is_relative() && !base.empty()) p = base / p;
        manifest.records.push_back(DatasetRecord{p.string(), label});
    }
    if (line_no == 0) {
        throw DataError("manifest '" + path + "' is empty (missing \"path,label\" header)");
    }
    return manifest;
}

void save_manifest(const std::string& path, const DatasetManifest& manifest) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path + "' for writing");

    const fs::path base = fs::path(path).parent_path();
    out << "path,label\n";
    for (const DatasetRecord& r : manifest.records) {
        fs::path p(r.path);
        if (!base.empty() && p.is_absolute()) {
            std::error_code ec;
            const fs::path rel = fs::relative(p, base, ec);
            if (!ec && !rel.empty()) p = rel;
        }
        out << p.string() << "," << label_name(r.label) << "\n";
    }
    if (!out) throw DataError("write failed for '" + path + "'");
}

SplitResult balanced_split(const DatasetManifest& manifest, std::size_t n_per_class,
                           std::uint64_t seed) {
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        const int label = manifest.records[i].label;
        if (label != kBenign && label != kMalignant) {
            throw ValidationError("manifest record " + std::to_string(i) + " has invalid label " +
                                  std::to_string(label));
        }
        by_class[label].push_back(i);
    }
    for (int label = 0; label < 2; ++label) {
        if (by_class[label].size() < n_per_class) {
            throw ValidationError("class '" + std::string(label_name(label)) + "' has " +
                                  std::to_string(by_class[label].size()) + " records, need " +
                                  std::to_string(n_per_class) + " for the balanced train split");
        }
    }

    Rng rng(seed);
    std::vector<bool> in_train(manifest.records.size(), false);
    for (int label = 0; label < 2; ++label) {
        std::vector<std::size_t>& pool = by_class[label];
        // Partial Fisher-Yates: the first n_per_class entries are a uniform
        // sample without replacement.
        for (std::size_t i = 0; i < n_per_class; ++i) {
            const std::size_t j = i + rng.below(pool.size() - i);
            std::swap(pool[i], pool[j]);
            in_train[pool[i]] = true;
        }
    }

    SplitResult split;
    split.train.provenance = manifest.provenance + " [train]";
    split.test.provenance = manifest.provenance + " [test]";
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        (in_train[i] ? split.train : split.test).records.push_back(manifest.records[i]);
    }
    return split;
}

}  // namespace radseq
