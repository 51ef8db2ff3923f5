#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "qck/kernels.hpp"

namespace qck::kernels::detail {

// Accumulates one kernel into `out`, restricted to the in-grid support.
inline void splat_one(const GaussianKernel& k, KernelScale scale, Raster<double>& out) {
    const double r2 = k.radius * k.radius;
    const double inv2s2 = 1.0 / (2.0 * k.bandwidth * k.bandwidth);
    // Pixel px is evaluated at px + 0.5, so |px + 0.5 - cx| <= r bounds px.
    const int x0 = std::max(0, static_cast<int>(std::ceil(k.cx - k.radius - 0.5)));
    const int x1 = std::min(out.width - 1, static_cast<int>(std::floor(k.cx + k.radius - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(k.cy - k.radius - 0.5)));
    const int y1 = std::min(out.height - 1, static_cast<int>(std::floor(k.cy + k.radius - 0.5)));
    if (x0 > x1 || y0 > y1) return;

    double norm = 1.0;
    if (scale == KernelScale::unit_mass) {
        double mass = 0.0;
        for (int y = y0; y <= y1; ++y) {
            const double dy = y + 0.5 - k.cy;
            for (int x = x0; x <= x1; ++x) {
                const double dx = x + 0.5 - k.cx;
                const double d2 = dx * dx + dy * dy;
                if (d2 <= r2) mass += std::exp(-d2 * inv2s2);
            }
        }
        if (!(mass > 0.0)) return;
        norm = 1.0 / mass;
    } else {
        norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * k.bandwidth);
    }

    for (int y = y0; y <= y1; ++y) {
        const double dy = y + 0.5 - k.cy;
        auto row = out.row(y);
        for (int x = x0; x <= x1; ++x) {
            const double dx = x + 0.5 - k.cx;
            const double d2 = dx * dx + dy * dy;
            if (d2 <= r2) row[static_cast<std::size_t>(x)] += norm * std::exp(-d2 * inv2s2);
        }
    }
}

}  // namespace qck::kernels::detail
