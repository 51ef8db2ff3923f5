#pragma once

#include <span>
#include <string>
#include <vector>

#include "qck/density.hpp"

namespace qck {

enum class FusionMode {
    regression_only,  // count comes from the regression head alone
    mean_of_counts,   // mean of the regression count and every map sum
    concat_feature    // map sums feed the count head; the model returns the fused count
};

std::string to_string(FusionMode mode);
FusionMode parse_fusion_mode(const std::string& text);

struct LossConfig {
    std::vector<Level> levels = default_levels();
    // One weight per level, then the count-loss weight.
    std::vector<double> weights = {1.0, 1.0, 1.0, 1.0};
    FusionMode fusion_mode = FusionMode::regression_only;

    [[nodiscard]] double count_weight() const { return weights.back(); }
    void validate() const;
};

struct LevelLoss {
    Level level;
    double loss = 0.0;
};

struct LossReport {
    std::vector<LevelLoss> per_level;
    double count_loss = 0.0;
    double total = 0.0;
};

// Mean squared pixel difference. Throws ValidationError on shape mismatch.
double level_loss(const DensityMap& pred, const DensityMap& target);

// (pred - gt)^2
constexpr double count_loss(double pred_count, double gt_count) noexcept {
    const double d = pred_count - gt_count;
    return d * d;
}

// Sum of a predicted map with negative pixels clamped to zero.
double clamped_sum(const DensityMap& map) noexcept;

double fuse_counts(FusionMode mode, double regression_count, std::span<const double> map_sums);

// Weighted mean of the per-level MSEs and the count loss. The count term uses
// fuse_counts over the clamped sums of the predicted maps.
LossReport composition_loss(const DensityStack& pred, const DensityStack& target, const LossConfig& cfg);

// Loss plus its gradient with respect to every predicted pixel and the
// predicted count. grad has the layout of pred.
struct LossWithGrad {
    LossReport report;
    DensityStack grad;
};
LossWithGrad composition_loss_grad(const DensityStack& pred, const DensityStack& target, const LossConfig& cfg);

}  // namespace qck
