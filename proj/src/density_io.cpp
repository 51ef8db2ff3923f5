#include "qck/density_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace qck {

namespace {

constexpr std::array<char, 4> kMagic = {'Q', 'D', 'M', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError("QDM1: truncated header");
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

}  // namespace

void write_qdm(std::ostream& out, const DensityMap& map) {
    out.write(kMagic.data(), kMagic.size());
    put_u32(out, static_cast<std::uint32_t>(map.width()));
    put_u32(out, static_cast<std::uint32_t>(map.height()));
    put_u32(out, map.level.code());
    for (double v : map.grid.values) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

DensityMap read_qdm(std::istream& in) {
    std::array<char, 4> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw FormatError("QDM1: bad magic bytes");
    const std::uint32_t w = get_u32(in);
    const std::uint32_t h = get_u32(in);
    const std::uint32_t code = get_u32(in);
    if (w == 0 || h == 0 || w > (1u << 16) || h > (1u << 16)) throw FormatError("QDM1: implausible dimensions");
    DensityMap map{Level::from_code(code), Raster<double>(static_cast<int>(w), static_cast<int>(h), 0.0)};
    for (auto& v : map.grid.values) {
        std::uint32_t bits = 0;
        try {
            bits = get_u32(in);
        } catch (const FormatError&) {
            throw FormatError("QDM1: truncated pixel data");
        }
        v = static_cast<double>(std::bit_cast<float>(bits));
    }
    return map;
}

void save_qdm(const std::string& path, const DensityMap& map) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    write_qdm(out, map);
    if (!out) throw IoError("write failed for " + path);
}

DensityMap load_qdm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return read_qdm(in);
}

}  // namespace qck
