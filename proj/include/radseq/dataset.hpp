#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "radseq/error.hpp"

namespace radseq {

inline constexpr int kBenign = 0;
inline constexpr int kMalignant = 1;

const char* label_name(int label);
int parse_label(const std::string& name);  // throws ValidationError on unknown names

struct DatasetRecord {
    std::string path;
    int label = kBenign;
    bool operator==(const DatasetRecord&) const = default;
};

struct DatasetManifest {
    std::vector<DatasetRecord> records;
    std::string provenance;  // free-text note, e.g. the source file
};

/// Parses the manifest CSV: header exactly "path,label"; label benign or
/// malignant; LF line endings; paths resolved against the manifest's
/// directory. Duplicate paths and unknown labels are rejected with the
/// offending line number.
DatasetManifest load_manifest(const std::string& path);

/// Writes CSV in the same format; record paths are written relative to the
/// output manifest's directory when possible.
void save_manifest(const std::string& path, const DatasetManifest& manifest);

struct SplitResult {
    DatasetManifest train;
    DatasetManifest test;
};

/// Samples exactly n_per_class records per class uniformly without
/// replacement (seeded); everything else becomes the test split. Train and
/// test are disjoint, preserve manifest order, and together restore the
/// input. Throws ValidationError naming the class with too few records.
SplitResult balanced_split(const DatasetManifest& manifest, std::size_t n_per_class,
                           std::uint64_t seed);

}  // namespace radseq
