#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "radseq/image.hpp"
#include "radseq/sequencer.hpp"

namespace radseq {

/// Checkpoint layout (all integers little-endian):
///   magic "RDSQ"; u16 format version (1);
///   u64 JSON length + UTF-8 JSON spec block (architecture, seed,
///   normalization stats);
///   u32 parameter count; per parameter (in name order):
///   u32 name length + UTF-8 name, u32 rank, one u64 per extent,
///   then raw 32-bit little-endian values.
/// save -> load -> save reproduces the file byte-exactly.
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct Checkpoint {
    SequencerModel model;
    NormalizationStats stats;
};

void save_checkpoint(const std::string& path, const SequencerModel& model,
                     const NormalizationStats& stats);

Checkpoint load_checkpoint(const std::string& path);

nlohmann::json spec_to_json(const ModelSpec& spec, std::uint64_t seed,
                            const NormalizationStats& stats);

struct ParsedSpec {
    ModelSpec spec;
    std::uint64_t seed = 0;
    NormalizationStats stats;
};

ParsedSpec spec_from_json(const nlohmann::json& j);

}  // namespace radseq
