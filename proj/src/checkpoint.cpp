#include "radseq/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

namespace radseq {

namespace {

constexpr char kMagic[4] = {'R', 'D', 'S', 'Q'};

void put_bytes(std::ostream& out, const void* data, std::size_t n) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

template <typename U>
void put_le(std::ostream& out, U value) {
    unsigned char bytes[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFF);
    }
    put_bytes(out, bytes, sizeof(U));
}

void put_f32(std::ostream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    put_le(out, bits);
}

struct Reader {
    std::vector<unsigned char> bytes;
    std::size_t pos = 0;
    std::string path;

    [[noreturn]] void fail(const std::string& detail) const {
        throw DataError("checkpoint '" + path + "': " + detail + " at byte offset " +
                        std::to_string(pos));
    }

    void need(std::size_t n) const {
        if (bytes.size() - pos < n) {
            throw DataError("checkpoint '" + path + "': truncated, need " + std::to_string(n) +
                            " bytes at offset " + std::to_string(pos) + " but file ends at " +
                            std::to_string(bytes.size()));
        }
    }

    template <typename U>
    U get_le() {
        need(sizeof(U));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) {
            v |= static_cast<U>(bytes[pos + i]) << (8 * i);
        }
        pos += sizeof(U);
        return v;
    }

    float get_f32() {
        const std::uint32_t bits = get_le<std::uint32_t>();
        float v;
        std::memcpy(&v, &bits, sizeof(v));
        return v;
    }

    std::string get_string(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes.data() + pos), n);
        pos += n;
        return s;
    }
};

nlohmann::json layer_to_json(const LayerDesc& d) {
    switch (d.kind) {
        case LayerKind::Conv:
            return {{"kind", "conv"},     {"in", d.conv.in_channels}, {"out", d.conv.out_channels},
                    {"kh", d.conv.kernel_h}, {"kw", d.conv.kernel_w},  {"stride", d.conv.stride},
                    {"pad", d.conv.pad}};
        case LayerKind::Activation:
            return {{"kind", "activation"}};
        case LayerKind::Pool:
            return {{"kind", "pool"}, {"window", d.pool_window}, {"stride", d.pool_stride}};
        case LayerKind::Flatten:
            return {{"kind", "flatten"}};
        case LayerKind::FullyConnected:
            return {{"kind", "fc"}, {"in", d.fc_in}, {"out", d.fc_out}};
    }
    throw ValidationError("unknown layer kind");
}

LayerDesc layer_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "conv") {
        LayerDesc d;
        d.kind = LayerKind::Conv;
        d.conv.in_channels = j.at("in").get<std::size_t>();
        d.conv.out_channels = j.at("out").get<std::size_t>();
        d.conv.kernel_h = j.at("kh").get<std::size_t>();
        d.conv.kernel_w = j.at("kw").get<std::size_t>();
        d.conv.stride = j.at("stride").get<std::size_t>();
        d.conv.pad = j.at("pad").get<std::size_t>();
        return d;
    }
    if (kind == "activation") return LayerDesc::activation();
    if (kind == "pool") {
        return LayerDesc::pool(j.at("window").get<std::size_t>(), j.at("stride").get<std::size_t>());
    }
    if (kind == "flatten") return LayerDesc::flatten();
    if (kind == "fc") {
        return LayerDesc::fully_connected(j.at("out").get<std::size_t>(),
                                          j.at("in").get<std::size_t>());
    }
    throw DataError("unknown layer kind '" + kind + "' in checkpoint spec");
}

}  // namespace

nlohmann::json spec_to_json(const ModelSpec& spec, std::uint64_t seed,
                            const NormalizationStats& stats) {
    nlohmann::json columns = nlohmann::json::array();
    for (const ColumnSpec& col : spec.sequencer.columns) {
        nlohmann::json layers = nlohmann::json::array();
        for (const LayerDesc& d : col.layers) layers.push_back(layer_to_json(d));
        columns.push_back({{"layers", layers}});
    }
    return nlohmann::json{
        {"format", kCheckpointVersion},
        {"input",
         {{"channels", spec.sequencer.input_channels},
          {"height", spec.sequencer.input_h},
          {"width", spec.sequencer.input_w}}},
        {"merge", spec.sequencer.merge},
        {"columns", columns},
        {"head", {{"hidden", spec.head.hidden_width}, {"classes", spec.head.class_count}}},
        {"seed", seed},
        {"normalization",
         {{"mean", {stats.mean[0], stats.mean[1], stats.mean[2]}},
          {"std", {stats.std[0], stats.std[1], stats.std[2]}}}},
    };
}

ParsedSpec spec_from_json(const nlohmann::json& j) {
    ParsedSpec parsed;
    try {
        const nlohmann::json& input = j.at("input");
        parsed.spec.sequencer.input_channels = input.at("channels").get<std::size_t>();
        parsed.spec.sequencer.input_h = input.at("height").get<std::size_t>();
        parsed.spec.sequencer.input_w = input.at("width").get<std::size_t>();
        parsed.spec.sequencer.merge = j.at("merge").get<std::string>();
        for (const nlohmann::json& col : j.at("columns")) {
            ColumnSpec cs;
            for (const nlohmann::json& layer : col.at("layers")) {
                cs.layers.push_back(layer_from_json(layer));
            }
            parsed.spec.sequencer.columns.push_back(std::move(cs));
        }
        parsed.spec.head.hidden_width = j.at("head").at("hidden").get<std::size_t>();
        parsed.spec.head.class_count = j.at("head").at("classes").get<std::size_t>();
        parsed.seed = j.at("seed").get<std::uint64_t>();
        const nlohmann::json& norm = j.at("normalization");
        for (std::size_t c = 0; c < 3; ++c) {
            parsed.stats.mean[c] = norm.at("mean").at(c).get<float>();
            parsed.stats.std[c] = norm.at("std").at(c).get<float>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed checkpoint spec block: ") + e.what());
    }
    return parsed;
}

void save_checkpoint(const std::string& path, const SequencerModel& model,
                     const NormalizationStats& stats) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path + "' for writing");

    put_bytes(out, kMagic, sizeof(kMagic));
    put_le<std::uint16_t>(out, kCheckpointVersion);

    const std::string spec_json = spec_to_json(model.spec, model.seed, stats).dump();
    put_le<std::uint64_t>(out, spec_json.size());
    put_bytes(out, spec_json.data(), spec_json.size());

    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.params.size()));
    for (const auto& [name, tensor] : model.params) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        put_bytes(out, name.data(), name.size());
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.rank()));
        for (std::size_t e : tensor.shape()) put_le<std::uint64_t>(out, e);
        for (std::size_t i = 0; i < tensor.size(); ++i) put_f32(out, tensor[i]);
    }
    if (!out) throw DataError("write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint '" + path + "'");
    Reader r;
    r.path = path;
    r.bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());

    r.need(sizeof(kMagic));
    if (std::memcmp(r.bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        throw DataError("checkpoint '" + path + "': bad magic bytes (expected RDSQ)");
    }
    r.pos = sizeof(kMagic);

    const std::uint16_t version = r.get_le<std::uint16_t>();
    if (version != kCheckpointVersion) {
        throw DataError("checkpoint '" + path + "': unsupported format version " +
                        std::to_string(version));
    }

    const std::uint64_t json_len = r.get_le<std::uint64_t>();
    const std::string spec_json = r.get_string(json_len);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(spec_json);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("checkpoint '" + path + "': invalid spec JSON: " + e.what());
    }
    const ParsedSpec parsed = spec_from_json(j);

    Checkpoint ckpt;
    ckpt.model.spec = parsed.spec;
    ckpt.model.seed = parsed.seed;
    ckpt.stats = parsed.stats;

    const std::uint32_t count = r.get_le<std::uint32_t>();
    for (std::uint32_t k = 0; k < count; ++k) {
        const std::uint32_t name_len = r.get_le<std::uint32_t>();
        const std::string name = r.get_string(name_len);
        const std::uint32_t rank = r.get_le<std::uint32_t>();
        if (rank > 8) r.fail("implausible tensor rank " + std::to_string(rank));
        Shape shape(rank);
        std::size_t volume = 1;
        for (std::uint32_t a = 0; a < rank; ++a) {
            shape[a] = static_cast<std::size_t>(r.get_le<std::uint64_t>());
            if (shape[a] == 0) r.fail("zero extent in parameter '" + name + "'");
            volume *= shape[a];
        }
        r.need(volume * 4);
        std::vector<float> values(volume);
        for (std::size_t i = 0; i < volume; ++i) values[i] = r.get_f32();
        if (!ckpt.model.params.emplace(name, Tensor(std::move(shape), std::move(values))).second) {
            r.fail("duplicate parameter '" + name + "'");
        }
    }
    if (r.pos != r.bytes.size()) {
        r.fail("trailing bytes after the last parameter");
    }

    // The parameter set must match what the spec would allocate.
    const std::map<std::string, Shape> expected = parameter_shapes(parsed.spec);
    if (expected.size() != ckpt.model.params.size()) {
        throw DataError("checkpoint '" + path + "': holds " +
                        std::to_string(ckpt.model.params.size()) + " parameters, spec requires " +
                        std::to_string(expected.size()));
    }
    for (const auto& [name, shape] : expected) {
        auto it = ckpt.model.params.find(name);
        if (it == ckpt.model.params.end()) {
            throw DataError("checkpoint '" + path + "': missing parameter '" + name + "'");
        }
        if (it->second.shape() != shape) {
            throw DataError("checkpoint '" + path + "': parameter '" + name + "' has shape " +
                            shape_string(it->second.shape()) + ", spec requires " +
                            shape_string(shape));
        }
    }
    return ckpt;
}

}  // namespace radseq
