#pragma once

#include <span>
#include <vector>

#include "qck/annotations.hpp"
#include "qck/density.hpp"

namespace qck {

struct CountMetrics {
    double c_mae = 0.0;
    double c_mse = 0.0;  // root of the mean squared error
    double c_nae = 0.0;
};

// Throws ValidationError on empty or mismatched input, and DomainError when
// with_nae is set and some ground-truth count is zero.
CountMetrics counting_metrics(std::span<const double> pred, std::span<const double> gt, bool with_nae = true);

struct DensityMetrics {
    double dm_mae = 0.0;
    double dm_mse = 0.0;  // root of the per-pixel mean squared error
    double dm_hi = 0.0;
};

// Histogram intersection of the two maps after each is normalised to unit sum.
double histogram_intersection(const Raster<double>& a, const Raster<double>& b);
DensityMetrics density_metrics(const DensityMap& pred, const DensityMap& gt, bool with_hi = true);

struct Peak {
    int x = 0;
    int y = 0;
    double value = 0.0;
};

// Local maxima of at least value_threshold that strictly dominate every pixel
// within Chebyshev distance `radius`, except earlier row-major pixels of equal
// value that were themselves accepted suppress later ones. Sorted by
// descending value, then row-major.
std::vector<Peak> find_peaks(const DensityMap& map, double value_threshold, int radius);

struct MatchPair {
    std::size_t pred = 0;
    std::size_t gt = 0;
    double distance = 0.0;
};

struct MatchResult {
    std::vector<MatchPair> pairs;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
};

// Greedy 1-1 association: candidate pairs within threshold are taken in
// ascending distance, ties broken by the coordinate-sorted rank of the
// prediction and then of the ground truth, so the result does not depend on
// input order.
MatchResult greedy_match(std::span<const Point> preds, std::span<const Point> gts, double threshold);

struct PRCurve {
    std::vector<int> thresholds;
    std::vector<double> precision;
    std::vector<double> recall;
    std::vector<std::size_t> tp;
    double l_auc = 0.0;
};

// Precision/recall for distance thresholds 1..max_threshold. L-AUC is the
// trapezoidal area under the threshold-ordered (recall, precision) points,
// starting from recall 0 at the first threshold's precision.
PRCurve pr_curve(std::span<const Point> preds, std::span<const Point> gts, int max_threshold = 100);

// Merges per-image match counts into a dataset-level curve.
PRCurve merge_pr_curves(std::span<const PRCurve> curves, std::span<const std::size_t> n_preds,
                        std::span<const std::size_t> n_gts);

double l_auc(std::span<const double> recall, std::span<const double> precision);

struct AveragePR {
    double precision = 0.0;
    double recall = 0.0;
};
// Mean precision and recall over a subset of the curve's thresholds.
AveragePR average_at_thresholds(const PRCurve& curve, std::span<const int> thresholds);

// Mean section density times total area.
double jacobs_extrapolate(std::span<const double> section_densities, double total_area);

// Each pixel of value v contributes round(v) points at the pixel position.
std::vector<Point> decode_impulses(const DensityMap& localization);

// Peaks of a 1/downsample map mapped to image coordinates at block centres.
std::vector<Point> peaks_to_image(std::span<const Peak> peaks, int downsample);

}  // namespace qck
