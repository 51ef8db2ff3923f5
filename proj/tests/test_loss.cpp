#include <gtest/gtest.h>

#include <random>

#include "qck/loss.hpp"

using namespace qck;

namespace {

DensityMap filled(Level l, int w, int h, double v) { return {l, Raster<double>(w, h, v)}; }

DensityStack random_stack(std::mt19937& rng, int n, double lo = -0.2) {
    std::uniform_real_distribution<double> u(lo, 1.0);
    DensityStack s;
    for (Level l : default_levels()) {
        DensityMap m = filled(l, n, n, 0.0);
        for (double& v : m.grid.values) v = u(rng);
        s.maps.push_back(m);
    }
    s.count = 10 * u(rng);
    return s;
}

LossConfig config(FusionMode mode, std::vector<double> w = {1, 1, 1, 1}) {
    LossConfig c;
    c.weights = std::move(w);
    c.fusion_mode = mode;
    return c;
}

}  // namespace

TEST(LevelLoss, Examples) {
    const auto a = filled(Level::finite(1), 5, 3, 0.25);
    EXPECT_EQ(level_loss(a, a), 0.0);
    EXPECT_EQ(level_loss(filled(Level::finite(1), 6, 4, 1.0), filled(Level::finite(1), 6, 4, 0.0)), 1.0);
    DensityMap p = filled(Level::finite(1), 2, 1, 0.0), t = filled(Level::finite(1), 2, 1, 1.0);
    p.grid.values = {0, 1};
    EXPECT_DOUBLE_EQ(level_loss(p, t), 0.5);
    EXPECT_THROW(level_loss(p, filled(Level::finite(1), 1, 2, 0.0)), ValidationError);
}

TEST(LevelLoss, SymmetryAndScaling) {
    std::mt19937 rng(1);
    for (int i = 0; i < 20; ++i) {
        const auto a = random_stack(rng, 6).maps[0], b = random_stack(rng, 6).maps[0];
        EXPECT_DOUBLE_EQ(level_loss(a, b), level_loss(b, a));
        DensityMap a3 = a, b3 = b;
        for (double& v : a3.grid.values) v *= 3;
        for (double& v : b3.grid.values) v *= 3;
        EXPECT_NEAR(level_loss(a3, b3), 9 * level_loss(a, b), 1e-12);
    }
}

TEST(CountLoss, Examples) {
    static_assert(count_loss(10, 10) == 0);
    EXPECT_EQ(count_loss(10, 7), 9);
    EXPECT_EQ(count_loss(0, 4), 16);
}

TEST(FuseCounts, Examples) {
    const std::vector<double> sums = {110, 90, 100};
    EXPECT_DOUBLE_EQ(fuse_counts(FusionMode::mean_of_counts, 100, sums), 100);
    EXPECT_EQ(fuse_counts(FusionMode::regression_only, 42, sums), 42);
    EXPECT_EQ(fuse_counts(FusionMode::regression_only, 42, {}), 42);
    const std::vector<double> eq = {7.5, 7.5, 7.5};
    EXPECT_DOUBLE_EQ(fuse_counts(FusionMode::mean_of_counts, 7.5, eq), 7.5);
    EXPECT_EQ(fuse_counts(FusionMode::concat_feature, 13, sums), 13);
    EXPECT_THROW(fuse_counts(FusionMode::mean_of_counts, 1, {}), ValidationError);
    EXPECT_THROW(fuse_counts(FusionMode::concat_feature, 1, {}), ValidationError);
    const std::vector<double> perm = {100, 110, 90};
    EXPECT_DOUBLE_EQ(fuse_counts(FusionMode::mean_of_counts, 5, sums), fuse_counts(FusionMode::mean_of_counts, 5, perm));
}

TEST(CompositionLoss, Identity) {
    std::mt19937 rng(2);
    const auto s = random_stack(rng, 4, 0.0);
    for (auto mode : {FusionMode::regression_only, FusionMode::concat_feature}) {
        const auto r = composition_loss(s, s, config(mode));
        EXPECT_EQ(r.total, 0.0);
        EXPECT_EQ(r.count_loss, 0.0);
        for (const auto& l : r.per_level) EXPECT_EQ(l.loss, 0.0);
    }
    // Mean fusion: a consistent prediction (regression count equal to every
    // map sum) has zero loss.
    DensityStack c = s;
    for (auto& m : c.maps) m.grid.values.assign(m.grid.size(), 0.5);
    c.count = 8.0;
    const auto r = composition_loss(c, c, config(FusionMode::mean_of_counts));
    EXPECT_NEAR(r.total, 0.0, 1e-24);
}

TEST(CompositionLoss, WeightedMean) {
    // Targets zero; predictions constant so each level MSE is the squared value.
    DensityStack pred, target;
    for (Level l : default_levels()) {
        pred.maps.push_back(filled(l, 3, 3, 1.0));
        target.maps.push_back(filled(l, 3, 3, 0.0));
    }
    pred.count = 1;
    target.count = 0;
    EXPECT_DOUBLE_EQ(composition_loss(pred, target, config(FusionMode::regression_only)).total, 1.0);

    pred.maps[0].grid.values.assign(9, std::sqrt(3.0));
    pred.maps[1].grid.values.assign(9, 0.0);
    pred.maps[2].grid.values.assign(9, 0.0);
    pred.count = std::sqrt(999.0);
    const auto r = composition_loss(pred, target, config(FusionMode::regression_only, {2, 1, 1, 0}));
    EXPECT_NEAR(r.per_level[0].loss, 3.0, 1e-12);
    EXPECT_NEAR(r.count_loss, 999.0, 1e-9);
    EXPECT_NEAR(r.total, 1.5, 1e-12);
}

TEST(CompositionLoss, Errors) {
    std::mt19937 rng(3);
    auto a = random_stack(rng, 4);
    auto b = a;
    b.maps.pop_back();
    EXPECT_THROW(composition_loss(a, b, config(FusionMode::regression_only)), ValidationError);
    EXPECT_THROW(config(FusionMode::regression_only, {0, 0, 0, 0}).validate(), ValidationError);
    EXPECT_THROW(config(FusionMode::regression_only, {1, 1, 1}).validate(), ValidationError);
    EXPECT_THROW(config(FusionMode::regression_only, {1, -1, 1, 1}).validate(), ValidationError);
}

TEST(CompositionLoss, NonNegativeAndZeroOnlyAtTarget) {
    std::mt19937 rng(4);
    for (int i = 0; i < 20; ++i) {
        const auto p = random_stack(rng, 5), t = random_stack(rng, 5, 0.0);
        EXPECT_GT(composition_loss(p, t, config(FusionMode::regression_only)).total, 0.0);
        EXPECT_GE(composition_loss(p, t, config(FusionMode::mean_of_counts)).total, 0.0);
    }
}

// Central differences on every predicted pixel and the count, step 1e-3.
TEST(CompositionLoss, GradientMatchesFiniteDifferences) {
    std::mt19937 rng(5);
    const double h = 1e-3;
    for (auto mode : {FusionMode::regression_only, FusionMode::mean_of_counts, FusionMode::concat_feature}) {
        for (int trial = 0; trial < 5; ++trial) {
            // Keep pixels away from the clamp kink at zero.
            auto pred = random_stack(rng, 8, 0.01);
            std::uniform_real_distribution<double> sign(0.0, 1.0);
            for (auto& m : pred.maps)
                for (double& v : m.grid.values)
                    if (sign(rng) < 0.2) v = -v - 0.01;
            const auto target = random_stack(rng, 8, 0.0);
            const auto cfg = config(mode, {1.0, 0.5, 2.0, 0.3});
            const auto g = composition_loss_grad(pred, target, cfg);
            EXPECT_DOUBLE_EQ(g.report.total, composition_loss(pred, target, cfg).total);
            double max_rel = 0.0;
            auto check = [&](double& slot, double analytic) {
                const double keep = slot;
                slot = keep + h;
                const double up = composition_loss(pred, target, cfg).total;
                slot = keep - h;
                const double dn = composition_loss(pred, target, cfg).total;
                slot = keep;
                const double fd = (up - dn) / (2 * h);
                max_rel = std::max(max_rel, std::abs(fd - analytic) / std::max({std::abs(fd), std::abs(analytic), 1e-8}));
            };
            for (std::size_t l = 0; l < pred.maps.size(); ++l)
                for (std::size_t i = 0; i < pred.maps[l].grid.size(); ++i)
                    check(pred.maps[l].grid.values[i], g.grad.maps[l].grid.values[i]);
            check(pred.count, g.grad.count);
            EXPECT_LT(max_rel, 1e-6) << to_string(mode);
        }
    }
}

TEST(Fusion, Parse) {
    EXPECT_EQ(parse_fusion_mode("regression_only"), FusionMode::regression_only);
    EXPECT_EQ(parse_fusion_mode("mean_of_counts"), FusionMode::mean_of_counts);
    EXPECT_EQ(parse_fusion_mode("concat_feature"), FusionMode::concat_feature);
    EXPECT_EQ(to_string(FusionMode::mean_of_counts), "mean_of_counts");
    EXPECT_THROW(parse_fusion_mode("bogus"), Error);
}
