#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "qck/annotations.hpp"
#include "qck/raster.hpp"

namespace qck {

// Sharpness level k of the density family. Finite levels are reals >= 1; the
// infinite level denotes the binary localization map.
class Level {
public:
    constexpr Level() = default;
    static Level finite(double k);
    static constexpr Level infinite() { return Level(std::numeric_limits<double>::infinity()); }

    [[nodiscard]] constexpr bool is_infinite() const noexcept { return k_ == std::numeric_limits<double>::infinity(); }
    [[nodiscard]] constexpr double k() const noexcept { return k_; }

    // k*1000 rounded, or 0xFFFFFFFF for the infinite level.
    [[nodiscard]] std::uint32_t code() const;
    static Level from_code(std::uint32_t code);

    // "1", "2.5", "inf"
    [[nodiscard]] std::string to_string() const;
    static Level parse(const std::string& text);

    constexpr auto operator<=>(const Level&) const = default;

private:
    constexpr explicit Level(double k) : k_(k) {}
    double k_ = 1.0;
};

std::vector<Level> parse_levels(const std::string& csv);
std::vector<Level> default_levels();

struct KernelPolicy {
    double tau = 15.0;
    Level level = Level::finite(1.0);
    // Rescale each kernel so its discrete in-image sum is exactly one. When
    // off, the literal prefactor 1/(sqrt(2 pi) f(sigma)) is used.
    bool normalize_per_kernel = true;
    double truncation_radius_sigmas = 4.0;
    // Bandwidths below this floor (duplicate or sub-pixel neighbours) are
    // raised to it before the level transform.
    double min_sigma = 1.0;

    void validate() const;
};

struct DensityMap {
    Level level;
    Raster<double> grid;

    [[nodiscard]] int width() const noexcept { return grid.width; }
    [[nodiscard]] int height() const noexcept { return grid.height; }
    [[nodiscard]] double sum() const noexcept;
    [[nodiscard]] double max() const noexcept;
};

struct DensityStack {
    std::vector<DensityMap> maps;
    double count = 0.0;

    [[nodiscard]] std::vector<Level> levels() const;
    [[nodiscard]] int width() const noexcept { return maps.empty() ? 0 : maps.front().width(); }
    [[nodiscard]] int height() const noexcept { return maps.empty() ? 0 : maps.front().height(); }
    // Throws ValidationError unless maps share dimensions and levels strictly increase.
    void validate() const;
};

// f_k(sigma) = sigma^(1/k). Returns nullopt (Dirac impulse) for the infinite level.
std::optional<double> bandwidth_at_level(double sigma, Level k);

// Sum of truncated adaptive Gaussians at a finite level.
DensityMap render_density(const AnnotationSet& ann, const KernelPolicy& policy);
// Single-threaded reference path of render_density.
DensityMap render_density_serial(const AnnotationSet& ann, const KernelPolicy& policy);

// Unit impulse at the nearest pixel to each head, clamped into the grid;
// collisions accumulate so the map sums to N.
DensityMap render_localization(const AnnotationSet& ann, int width, int height);

// Either of the two above depending on policy.level.
DensityMap render_level(const AnnotationSet& ann, const KernelPolicy& policy);

// Mass-preserving block sum by an integer factor that divides both dimensions.
Raster<double> block_sum(const Raster<double>& src, int factor);

// Renders every level at full resolution then block-sums by `downsample`.
DensityStack build_target_stack(const AnnotationSet& ann, const std::vector<Level>& levels,
                                const KernelPolicy& policy, int downsample);

}  // namespace qck
