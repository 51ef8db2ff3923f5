#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "qck/model.hpp"

namespace qck {

using nlohmann::json;

namespace {

constexpr std::array<char, 4> kMagic = {'Q', 'C', 'P', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

bool get_u32(std::istream& in, std::uint32_t& v) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) return false;
    v = static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
        static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
    return true;
}

json config_json(const ModelParams& p) {
    const ModelConfig& c = p.config;
    json levels = json::array();
    for (const Level& l : c.levels) levels.push_back(l.to_string());
    json tensors = json::array();
    for (const auto& t : parameter_layout(c)) tensors.push_back({{"name", t.name}, {"size", t.size}});
    return {{"version", p.version},       {"input_size", c.input_size}, {"downsample", c.downsample},
            {"channels", c.channels},     {"head_width", c.head_width}, {"count_hidden", c.count_hidden},
            {"levels", levels},           {"fusion", to_string(c.fusion)}, {"seed", c.seed},
            {"tensors", tensors}};
}

}  // namespace

void write_checkpoint(std::ostream& out, const ModelParams& params) {
    if (params.values.size() != parameter_count(params.config))
        throw ValidationError("checkpoint: parameter count does not match config");
    const std::string block = config_json(params).dump();
    out.write(kMagic.data(), kMagic.size());
    put_u32(out, static_cast<std::uint32_t>(block.size()));
    out.write(block.data(), static_cast<std::streamsize>(block.size()));
    for (float v : params.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
}

ModelParams read_checkpoint(std::istream& in) {
    std::array<char, 4> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw FormatError("QCP1: bad magic bytes");
    std::uint32_t len = 0;
    if (!get_u32(in, len) || len > (1u << 24)) throw FormatError("QCP1: bad config block length");
    std::string block(len, '\0');
    if (!in.read(block.data(), len)) throw FormatError("QCP1: truncated config block");

    ModelParams p;
    try {
        const json j = json::parse(block);
        p.version = j.at("version").get<std::uint32_t>();
        if (p.version != ModelParams::kVersion)
            throw FormatError("QCP1: unsupported checkpoint version " + std::to_string(p.version));
        ModelConfig& c = p.config;
        c.input_size = j.at("input_size").get<int>();
        c.downsample = j.at("downsample").get<int>();
        c.channels = j.at("channels").get<std::vector<int>>();
        c.head_width = j.at("head_width").get<int>();
        c.count_hidden = j.at("count_hidden").get<int>();
        c.levels.clear();
        for (const auto& l : j.at("levels")) c.levels.push_back(Level::parse(l.get<std::string>()));
        c.fusion = parse_fusion_mode(j.at("fusion").get<std::string>());
        c.seed = j.at("seed").get<std::uint64_t>();
        const auto layout = parameter_layout(c);
        const auto& tensors = j.at("tensors");
        if (tensors.size() != layout.size()) throw FormatError("QCP1: tensor table does not match config");
        for (std::size_t i = 0; i < layout.size(); ++i)
            if (tensors[i].at("name").get<std::string>() != layout[i].name ||
                tensors[i].at("size").get<std::size_t>() != layout[i].size)
                throw FormatError("QCP1: tensor " + layout[i].name + " does not match config");
    } catch (const json::exception& e) {
        throw FormatError(std::string("QCP1: bad config block: ") + e.what());
    } catch (const ValidationError& e) {
        throw FormatError(std::string("QCP1: invalid model config: ") + e.what());
    }

    p.values.resize(parameter_count(p.config));
    for (float& v : p.values) {
        std::uint32_t bits = 0;
        if (!get_u32(in, bits)) throw FormatError("QCP1: truncated parameter data");
        v = std::bit_cast<float>(bits);
        if (!std::isfinite(v)) throw FormatError("QCP1: non-finite parameter");
    }
    return p;
}

void save_checkpoint(const std::string& path, const ModelParams& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint " + path);
    write_checkpoint(out, params);
    if (!out) throw IoError("write failed for " + path);
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path);
    return read_checkpoint(in);
}

}  // namespace qck
