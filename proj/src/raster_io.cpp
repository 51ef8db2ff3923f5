#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

#include "qck/raster.hpp"

namespace qck {

std::vector<float> resize_bilinear(const GrayImage& src, int out_w, int out_h) {
    if (src.empty() || out_w <= 0 || out_h <= 0) throw ValidationError("resize_bilinear: empty source or target");
    std::vector<float> out(static_cast<std::size_t>(out_w) * out_h);
    const double sx = static_cast<double>(src.width) / out_w;
    const double sy = static_cast<double>(src.height) / out_h;
    for (int y = 0; y < out_h; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.height - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, src.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.width - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, src.width - 1);
            const double wx = fx - x0;
            const double top = (1 - wx) * src.at(x0, y0) + wx * src.at(x1, y0);
            const double bot = (1 - wx) * src.at(x0, y1) + wx * src.at(x1, y1);
            out[static_cast<std::size_t>(y) * out_w + x] = static_cast<float>((1 - wy) * top + wy * bot);
        }
    }
    return out;
}

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string pgm_token(std::istream& in) {
    std::string tok;
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            if (!tok.empty()) break;
        } else {
            tok.push_back(static_cast<char>(c));
        }
        c = in.get();
    }
    return tok;
}

}  // namespace

GrayImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image " + path);
    if (pgm_token(in) != "P5") throw FormatError(path + ": not a binary PGM (P5)");
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(pgm_token(in));
        h = std::stoi(pgm_token(in));
        maxval = std::stoi(pgm_token(in));
    } catch (const std::exception&) {
        throw FormatError(path + ": malformed PGM header");
    }
    if (w <= 0 || h <= 0 || maxval != 255) throw FormatError(path + ": unsupported PGM geometry or maxval");
    GrayImage img(w, h);
    in.read(reinterpret_cast<char*>(img.values.data()), static_cast<std::streamsize>(img.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.size())) throw FormatError(path + ": truncated PGM data");
    return img;
}

void write_pgm(const std::string& path, const GrayImage& image) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write image " + path);
    out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.values.data()), static_cast<std::streamsize>(image.size()));
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace qck
