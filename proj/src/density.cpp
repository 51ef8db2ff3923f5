#include "qck/density.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "qck/kernels.hpp"

namespace qck {

Level Level::finite(double k) {
    if (!(k >= 1.0) || !std::isfinite(k)) throw DomainError("density level must be a finite real >= 1 or inf");
    return Level(k);
}

std::uint32_t Level::code() const {
    if (is_infinite()) return 0xFFFFFFFFu;
    return static_cast<std::uint32_t>(std::lround(k_ * 1000.0));
}

Level Level::from_code(std::uint32_t code) {
    if (code == 0xFFFFFFFFu) return infinite();
    return finite(code / 1000.0);
}

std::string Level::to_string() const {
    if (is_infinite()) return "inf";
    std::ostringstream out;
    out << k_;
    return out.str();
}

Level Level::parse(const std::string& text) {
    std::string t;
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) t.push_back(static_cast<char>(std::tolower(c)));
    if (t == "inf" || t == "infinity") return infinite();
    std::size_t used = 0;
    double k = 0;
    try {
        k = std::stod(t, &used);
    } catch (const std::exception&) {
        throw FormatError("cannot parse density level '" + text + "'");
    }
    if (used != t.size()) throw FormatError("cannot parse density level '" + text + "'");
    return finite(k);
}

std::vector<Level> parse_levels(const std::string& csv) {
    std::vector<Level> out;
    std::stringstream in(csv);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(Level::parse(item));
    if (out.empty()) throw FormatError("empty level list");
    return out;
}

std::vector<Level> default_levels() { return {Level::finite(1.0), Level::finite(2.0), Level::infinite()}; }

void KernelPolicy::validate() const {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw DomainError("kernel policy: tau must be positive");
    if (!(truncation_radius_sigmas >= 3.0)) throw DomainError("kernel policy: truncation radius must be >= 3 sigma");
    if (!(min_sigma > 0.0)) throw DomainError("kernel policy: min_sigma must be positive");
}

double DensityMap::sum() const noexcept {
    double s = 0.0;
    for (double v : grid.values) s += v;
    return s;
}

double DensityMap::max() const noexcept {
    if (grid.values.empty()) return 0.0;
    return *std::max_element(grid.values.begin(), grid.values.end());
}

std::vector<Level> DensityStack::levels() const {
    std::vector<Level> out;
    for (const auto& m : maps) out.push_back(m.level);
    return out;
}

void DensityStack::validate() const {
    for (std::size_t i = 0; i < maps.size(); ++i) {
        if (maps[i].width() != width() || maps[i].height() != height())
            throw ValidationError("density stack maps differ in dimensions");
        if (i > 0 && !(maps[i - 1].level < maps[i].level))
            throw ValidationError("density stack levels must be strictly increasing");
    }
}

std::optional<double> bandwidth_at_level(double sigma, Level k) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("bandwidth: sigma must be positive");
    if (k.is_infinite()) return std::nullopt;
    return std::pow(sigma, 1.0 / k.k());
}

namespace {

std::vector<kernels::GaussianKernel> level_kernels(const AnnotationSet& ann, const KernelPolicy& policy) {
    policy.validate();
    if (policy.level.is_infinite()) throw DomainError("render_density needs a finite level; use render_localization");
    const auto sigma = nn_bandwidths(ann, policy.tau);
    std::vector<kernels::GaussianKernel> ks;
    ks.reserve(sigma.size());
    for (std::size_t i = 0; i < sigma.size(); ++i) {
        const double bw = *bandwidth_at_level(std::max(sigma[i], policy.min_sigma), policy.level);
        ks.push_back({ann.points()[i].x, ann.points()[i].y, bw, policy.truncation_radius_sigmas * bw});
    }
    return ks;
}

kernels::KernelScale scale_of(const KernelPolicy& p) {
    return p.normalize_per_kernel ? kernels::KernelScale::unit_mass : kernels::KernelScale::literal_1d_norm;
}

}  // namespace

DensityMap render_density(const AnnotationSet& ann, const KernelPolicy& policy) {
    const auto ks = level_kernels(ann, policy);
    DensityMap map{policy.level, Raster<double>(ann.width(), ann.height(), 0.0)};
    kernels::splat_gaussians(ks, scale_of(policy), map.grid);
    return map;
}

DensityMap render_density_serial(const AnnotationSet& ann, const KernelPolicy& policy) {
    const auto ks = level_kernels(ann, policy);
    DensityMap map{policy.level, Raster<double>(ann.width(), ann.height(), 0.0)};
    kernels::reference::splat_gaussians(ks, scale_of(policy), map.grid);
    return map;
}

DensityMap render_localization(const AnnotationSet& ann, int width, int height) {
    if (width <= 0 || height <= 0) throw ValidationError("localization grid must be nonempty");
    DensityMap map{Level::infinite(), Raster<double>(width, height, 0.0)};
    const double sx = static_cast<double>(width) / ann.width();
    const double sy = static_cast<double>(height) / ann.height();
    for (const Point& p : ann.points()) {
        // Nearest pixel, clamped so heads near the far edge stay in the grid.
        const auto px = std::clamp<long>(std::lround(p.x * sx), 0, width - 1);
        const auto py = std::clamp<long>(std::lround(p.y * sy), 0, height - 1);
        map.grid.at(static_cast<int>(px), static_cast<int>(py)) += 1.0;
    }
    return map;
}

DensityMap render_level(const AnnotationSet& ann, const KernelPolicy& policy) {
    if (policy.level.is_infinite()) return render_localization(ann, ann.width(), ann.height());
    return render_density(ann, policy);
}

Raster<double> block_sum(const Raster<double>& src, int factor) {
    if (factor < 1) throw DomainError("downsample factor must be >= 1");
    if (src.width % factor || src.height % factor)
        throw ValidationError("downsample factor " + std::to_string(factor) + " does not divide " +
                              std::to_string(src.width) + "x" + std::to_string(src.height));
    if (factor == 1) return src;
    Raster<double> out(src.width / factor, src.height / factor, 0.0);
    for (int y = 0; y < src.height; ++y) {
        auto row = src.row(y);
        auto dst = out.row(y / factor);
        for (int x = 0; x < src.width; ++x) dst[static_cast<std::size_t>(x / factor)] += row[static_cast<std::size_t>(x)];
    }
    return out;
}

DensityStack build_target_stack(const AnnotationSet& ann, const std::vector<Level>& levels,
                                const KernelPolicy& policy, int downsample) {
    if (levels.empty()) throw ValidationError("target stack needs at least one level");
    if (downsample < 1) throw DomainError("downsample factor must be >= 1");
    if (ann.width() % downsample || ann.height() % downsample)
        throw ValidationError("downsample factor does not divide the patch dimensions");
    DensityStack stack;
    for (const Level& lv : levels) {
        KernelPolicy p = policy;
        p.level = lv;
        DensityMap full = render_level(ann, p);
        stack.maps.push_back({lv, block_sum(full.grid, downsample)});
    }
    stack.count = static_cast<double>(ann.count());
    stack.validate();
    return stack;
}

}  // namespace qck
