#include "qck/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qck {

std::string to_string(FusionMode mode) {
    switch (mode) {
        case FusionMode::regression_only: return "regression_only";
        case FusionMode::mean_of_counts: return "mean_of_counts";
        case FusionMode::concat_feature: return "concat_feature";
    }
    return "?";
}

FusionMode parse_fusion_mode(const std::string& text) {
    if (text == "regression_only") return FusionMode::regression_only;
    if (text == "mean_of_counts" || text == "mean") return FusionMode::mean_of_counts;
    if (text == "concat_feature" || text == "concatenate") return FusionMode::concat_feature;
    throw FormatError("unknown fusion mode '" + text + "'");
}

void LossConfig::validate() const {
    if (levels.empty()) throw ValidationError("loss config: at least one level is required");
    for (std::size_t i = 1; i < levels.size(); ++i)
        if (!(levels[i - 1] < levels[i])) throw ValidationError("loss config: levels must be strictly increasing");
    if (weights.size() != levels.size() + 1)
        throw ValidationError("loss config: need one weight per level plus one for the count loss");
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("loss config: weights must be nonnegative");
        total += w;
    }
    if (!(total > 0.0)) throw ValidationError("loss config: weights must not all be zero");
}

double level_loss(const DensityMap& pred, const DensityMap& target) {
    if (pred.width() != target.width() || pred.height() != target.height())
        throw ValidationError("level_loss: map dimensions differ");
    if (pred.grid.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.grid.size(); ++i) {
        const double d = pred.grid.values[i] - target.grid.values[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.grid.size());
}

double clamped_sum(const DensityMap& map) noexcept {
    double s = 0.0;
    for (double v : map.grid.values) s += std::max(v, 0.0);
    return s;
}

double fuse_counts(FusionMode mode, double regression_count, std::span<const double> map_sums) {
    switch (mode) {
        case FusionMode::regression_only: return regression_count;
        case FusionMode::concat_feature:
            if (map_sums.empty()) throw ValidationError("fuse_counts: concat mode requires map sums");
            return regression_count;
        case FusionMode::mean_of_counts: {
            if (map_sums.empty()) throw ValidationError("fuse_counts: mean mode requires map sums");
            const double s = std::accumulate(map_sums.begin(), map_sums.end(), regression_count);
            return s / static_cast<double>(map_sums.size() + 1);
        }
    }
    return regression_count;
}

namespace {

void check_compatible(const DensityStack& pred, const DensityStack& target, const LossConfig& cfg) {
    cfg.validate();
    if (pred.maps.size() != cfg.levels.size() || target.maps.size() != cfg.levels.size())
        throw ValidationError("composition_loss: stacks do not carry the configured levels");
    for (std::size_t i = 0; i < cfg.levels.size(); ++i) {
        if (pred.maps[i].level != cfg.levels[i] || target.maps[i].level != cfg.levels[i])
            throw ValidationError("composition_loss: level mismatch at index " + std::to_string(i));
        if (pred.maps[i].width() != target.maps[i].width() || pred.maps[i].height() != target.maps[i].height())
            throw ValidationError("composition_loss: map dimensions differ at level " + cfg.levels[i].to_string());
    }
}

double fused_count(const DensityStack& pred, FusionMode mode) {
    std::vector<double> sums;
    for (const auto& m : pred.maps) sums.push_back(clamped_sum(m));
    return fuse_counts(mode, pred.count, sums);
}

}  // namespace

LossReport composition_loss(const DensityStack& pred, const DensityStack& target, const LossConfig& cfg) {
    check_compatible(pred, target, cfg);
    LossReport r;
    const double wsum = std::accumulate(cfg.weights.begin(), cfg.weights.end(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < cfg.levels.size(); ++i) {
        const double l = level_loss(pred.maps[i], target.maps[i]);
        r.per_level.push_back({cfg.levels[i], l});
        total += cfg.weights[i] * l;
    }
    r.count_loss = count_loss(fused_count(pred, cfg.fusion_mode), target.count);
    total += cfg.count_weight() * r.count_loss;
    r.total = total / wsum;
    return r;
}

LossWithGrad composition_loss_grad(const DensityStack& pred, const DensityStack& target, const LossConfig& cfg) {
    LossWithGrad out{composition_loss(pred, target, cfg), DensityStack{}};
    const double wsum = std::accumulate(cfg.weights.begin(), cfg.weights.end(), 0.0);
    const double fused = fused_count(pred, cfg.fusion_mode);
    // d total / d fused count
    const double dcount = cfg.count_weight() / wsum * 2.0 * (fused - target.count);
    const double share = cfg.fusion_mode == FusionMode::mean_of_counts ? 1.0 / static_cast<double>(pred.maps.size() + 1)
                                                                       : 1.0;

    for (std::size_t i = 0; i < pred.maps.size(); ++i) {
        const auto& pm = pred.maps[i];
        const auto& tm = target.maps[i];
        DensityMap g{pm.level, Raster<double>(pm.width(), pm.height(), 0.0)};
        const double scale = cfg.weights[i] / wsum * 2.0 / static_cast<double>(std::max<std::size_t>(pm.grid.size(), 1));
        for (std::size_t p = 0; p < pm.grid.size(); ++p) {
            double v = scale * (pm.grid.values[p] - tm.grid.values[p]);
            if (cfg.fusion_mode == FusionMode::mean_of_counts && pm.grid.values[p] > 0.0) v += dcount * share;
            g.grid.values[p] = v;
        }
        out.grad.maps.push_back(std::move(g));
    }
    out.grad.count = dcount * share;
    return out;
}

}  // namespace qck
