#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "qck/error.hpp"

namespace qck {

// Dense row-major single-channel grid.
template <typename T>
struct Raster {
    int width = 0;
    int height = 0;
    std::vector<T> values;

    Raster() = default;
    Raster(int w, int h, T fill = T{})
        : width(w), height(h), values(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {
        if (w < 0 || h < 0) throw ValidationError("raster dimensions must be nonnegative");
    }

    [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
    [[nodiscard]] bool empty() const noexcept { return values.empty(); }

    T& at(int x, int y) noexcept { return values[static_cast<std::size_t>(y) * width + x]; }
    const T& at(int x, int y) const noexcept { return values[static_cast<std::size_t>(y) * width + x]; }

    std::span<T> row(int y) noexcept { return {values.data() + static_cast<std::size_t>(y) * width, static_cast<std::size_t>(width)}; }
    std::span<const T> row(int y) const noexcept {
        return {values.data() + static_cast<std::size_t>(y) * width, static_cast<std::size_t>(width)};
    }

    bool operator==(const Raster&) const = default;
};

using GrayImage = Raster<std::uint8_t>;

// Copies the window [x0, x0+w) x [y0, y0+h) out of `src`; pixels outside the
// source read as zero.
template <typename T>
Raster<T> crop_zero_padded(const Raster<T>& src, int x0, int y0, int w, int h) {
    Raster<T> out(w, h, T{});
    for (int y = 0; y < h; ++y) {
        const int sy = y0 + y;
        if (sy < 0 || sy >= src.height) continue;
        for (int x = 0; x < w; ++x) {
            const int sx = x0 + x;
            if (sx < 0 || sx >= src.width) continue;
            out.at(x, y) = src.at(sx, sy);
        }
    }
    return out;
}

// Bilinear resize with pixel-center alignment. Sampling positions outside the
// source clamp to the edge.
std::vector<float> resize_bilinear(const GrayImage& src, int out_w, int out_h);

// Portable graymap (binary P5, maxval 255).
GrayImage read_pgm(const std::string& path);
void write_pgm(const std::string& path, const GrayImage& image);

}  // namespace qck
