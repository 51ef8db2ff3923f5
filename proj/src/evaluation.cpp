#include "qck/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace qck {

CountMetrics counting_metrics(std::span<const double> pred, std::span<const double> gt, bool with_nae) {
    if (pred.size() != gt.size()) throw ValidationError("counting_metrics: prediction/ground-truth length mismatch");
    if (pred.empty()) throw ValidationError("counting_metrics: empty input");
    CountMetrics m;
    double sq = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = std::abs(pred[i] - gt[i]);
        m.c_mae += e;
        sq += e * e;
        if (with_nae) {
            if (!(gt[i] > 0.0)) throw DomainError("counting_metrics: NAE undefined for a zero ground-truth count");
            m.c_nae += e / gt[i];
        }
    }
    const double n = static_cast<double>(pred.size());
    m.c_mae /= n;
    m.c_mse = std::sqrt(sq / n);
    m.c_nae /= n;
    return m;
}

double histogram_intersection(const Raster<double>& a, const Raster<double>& b) {
    if (a.width != b.width || a.height != b.height) throw ValidationError("histogram_intersection: shape mismatch");
    // Negative predictions carry no mass.
    double sa = 0.0, sb = 0.0;
    for (double v : a.values) sa += std::max(v, 0.0);
    for (double v : b.values) sb += std::max(v, 0.0);
    if (!(sa > 0.0) || !(sb > 0.0)) throw DomainError("histogram_intersection: map has no positive mass");
    double hi = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        hi += std::min(std::max(a.values[i], 0.0) / sa, std::max(b.values[i], 0.0) / sb);
    return std::min(hi, 1.0);
}

DensityMetrics density_metrics(const DensityMap& pred, const DensityMap& gt, bool with_hi) {
    if (pred.width() != gt.width() || pred.height() != gt.height())
        throw ValidationError("density_metrics: map dimensions differ");
    DensityMetrics m;
    const std::size_t n = pred.grid.size();
    if (n == 0) throw ValidationError("density_metrics: empty maps");
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = std::abs(pred.grid.values[i] - gt.grid.values[i]);
        m.dm_mae += e;
        sq += e * e;
    }
    m.dm_mae /= static_cast<double>(n);
    m.dm_mse = std::sqrt(sq / static_cast<double>(n));
    if (with_hi) m.dm_hi = histogram_intersection(pred.grid, gt.grid);
    return m;
}

std::vector<Peak> find_peaks(const DensityMap& map, double value_threshold, int radius) {
    if (radius < 1) throw DomainError("find_peaks: radius must be >= 1");
    const auto& g = map.grid;
    std::vector<char> accepted(g.size(), 0);
    std::vector<Peak> peaks;
    for (int y = 0; y < g.height; ++y)
        for (int x = 0; x < g.width; ++x) {
            const double v = g.at(x, y);
            if (!(v >= value_threshold)) continue;
            bool keep = true;
            for (int qy = std::max(0, y - radius); keep && qy <= std::min(g.height - 1, y + radius); ++qy)
                for (int qx = std::max(0, x - radius); qx <= std::min(g.width - 1, x + radius); ++qx) {
                    if (qx == x && qy == y) continue;
                    const double w = g.at(qx, qy);
                    if (w > v) {
                        keep = false;
                        break;
                    }
                    const bool earlier = qy < y || (qy == y && qx < x);
                    if (w == v && earlier && accepted[static_cast<std::size_t>(qy) * g.width + qx]) {
                        keep = false;
                        break;
                    }
                }
            if (keep) {
                accepted[static_cast<std::size_t>(y) * g.width + x] = 1;
                peaks.push_back({x, y, v});
            }
        }
    std::stable_sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) { return a.value > b.value; });
    return peaks;
}

namespace {

struct Candidate {
    double distance;
    std::size_t pred_rank;
    std::size_t gt_rank;
};

std::vector<std::size_t> canonical_ranks(std::span<const Point> pts) {
    std::vector<std::size_t> order(pts.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (pts[a].x != pts[b].x) return pts[a].x < pts[b].x;
        return pts[a].y < pts[b].y;
    });
    return order;  // order[rank] = original index
}

// All (pred, gt) pairs within max_distance, sorted by (distance, pred rank, gt rank).
std::vector<Candidate> candidates(std::span<const Point> preds, std::span<const Point> gts,
                                  const std::vector<std::size_t>& pred_order,
                                  const std::vector<std::size_t>& gt_order, double max_distance) {
    std::vector<Candidate> out;
    if (preds.empty() || gts.empty()) return out;
    const double cell = std::max(max_distance, 1.0);
    auto key = [&](const Point& p) {
        const auto cx = static_cast<long long>(std::floor(p.x / cell));
        const auto cy = static_cast<long long>(std::floor(p.y / cell));
        return (cx << 32) ^ (cy & 0xffffffffLL);
    };
    std::unordered_map<long long, std::vector<std::size_t>> buckets;  // gt ranks per cell
    for (std::size_t r = 0; r < gt_order.size(); ++r) buckets[key(gts[gt_order[r]])].push_back(r);
    const double max2 = max_distance * max_distance;
    for (std::size_t pr = 0; pr < pred_order.size(); ++pr) {
        const Point& p = preds[pred_order[pr]];
        const auto cx = static_cast<long long>(std::floor(p.x / cell));
        const auto cy = static_cast<long long>(std::floor(p.y / cell));
        for (long long dy = -1; dy <= 1; ++dy)
            for (long long dx = -1; dx <= 1; ++dx) {
                const auto it = buckets.find(((cx + dx) << 32) ^ ((cy + dy) & 0xffffffffLL));
                if (it == buckets.end()) continue;
                for (std::size_t gr : it->second) {
                    const Point& g = gts[gt_order[gr]];
                    const double ddx = p.x - g.x;
                    const double ddy = p.y - g.y;
                    const double d2 = ddx * ddx + ddy * ddy;
                    if (d2 <= max2) out.push_back({std::sqrt(d2), pr, gr});
                }
            }
    }
    std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        if (a.pred_rank != b.pred_rank) return a.pred_rank < b.pred_rank;
        return a.gt_rank < b.gt_rank;
    });
    return out;
}

MatchResult greedy_sorted(const std::vector<Candidate>& cands, const std::vector<std::size_t>& pred_order,
                          const std::vector<std::size_t>& gt_order, double threshold) {
    MatchResult m;
    std::vector<char> pred_used(pred_order.size(), 0), gt_used(gt_order.size(), 0);
    for (const Candidate& c : cands) {
        if (c.distance > threshold) break;
        if (pred_used[c.pred_rank] || gt_used[c.gt_rank]) continue;
        pred_used[c.pred_rank] = 1;
        gt_used[c.gt_rank] = 1;
        m.pairs.push_back({pred_order[c.pred_rank], gt_order[c.gt_rank], c.distance});
    }
    m.tp = m.pairs.size();
    m.fp = pred_order.size() - m.tp;
    m.fn = gt_order.size() - m.tp;
    return m;
}

}  // namespace

MatchResult greedy_match(std::span<const Point> preds, std::span<const Point> gts, double threshold) {
    if (!(threshold > 0.0)) throw DomainError("greedy_match: threshold must be positive");
    const auto po = canonical_ranks(preds);
    const auto go = canonical_ranks(gts);
    const auto cands = candidates(preds, gts, po, go, threshold);
    return greedy_sorted(cands, po, go, threshold);
}

double l_auc(std::span<const double> recall, std::span<const double> precision) {
    if (recall.size() != precision.size()) throw ValidationError("l_auc: length mismatch");
    if (recall.empty()) return 0.0;
    double area = 0.0;
    double r_prev = 0.0;
    double p_prev = precision.front();
    for (std::size_t i = 0; i < recall.size(); ++i) {
        area += (recall[i] - r_prev) * 0.5 * (precision[i] + p_prev);
        r_prev = recall[i];
        p_prev = precision[i];
    }
    return area;
}

namespace {

void fill_rates(PRCurve& c, std::size_t n_pred, std::size_t n_gt) {
    c.precision.clear();
    c.recall.clear();
    for (std::size_t tp : c.tp) {
        c.precision.push_back(n_pred == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(n_pred));
        c.recall.push_back(n_gt == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(n_gt));
    }
    c.l_auc = l_auc(c.recall, c.precision);
}

}  // namespace

PRCurve pr_curve(std::span<const Point> preds, std::span<const Point> gts, int max_threshold) {
    if (gts.empty()) throw ValidationError("pr_curve: at least one ground-truth point is required");
    if (max_threshold < 1) throw DomainError("pr_curve: max_threshold must be >= 1");
    const auto po = canonical_ranks(preds);
    const auto go = canonical_ranks(gts);
    const auto cands = candidates(preds, gts, po, go, static_cast<double>(max_threshold));
    PRCurve c;
    for (int t = 1; t <= max_threshold; ++t) {
        c.thresholds.push_back(t);
        c.tp.push_back(greedy_sorted(cands, po, go, static_cast<double>(t)).tp);
    }
    fill_rates(c, preds.size(), gts.size());
    return c;
}

PRCurve merge_pr_curves(std::span<const PRCurve> curves, std::span<const std::size_t> n_preds,
                        std::span<const std::size_t> n_gts) {
    if (curves.empty() || curves.size() != n_preds.size() || curves.size() != n_gts.size())
        throw ValidationError("merge_pr_curves: inconsistent inputs");
    PRCurve out;
    out.thresholds = curves.front().thresholds;
    out.tp.assign(out.thresholds.size(), 0);
    std::size_t np = 0, ng = 0;
    for (std::size_t i = 0; i < curves.size(); ++i) {
        if (curves[i].thresholds != out.thresholds) throw ValidationError("merge_pr_curves: threshold sets differ");
        for (std::size_t t = 0; t < out.tp.size(); ++t) out.tp[t] += curves[i].tp[t];
        np += n_preds[i];
        ng += n_gts[i];
    }
    fill_rates(out, np, ng);
    return out;
}

AveragePR average_at_thresholds(const PRCurve& curve, std::span<const int> thresholds) {
    if (thresholds.empty()) throw ValidationError("average_at_thresholds: no thresholds given");
    AveragePR a;
    for (int t : thresholds) {
        const auto it = std::find(curve.thresholds.begin(), curve.thresholds.end(), t);
        if (it == curve.thresholds.end())
            throw ValidationError("threshold " + std::to_string(t) + " is not on the curve");
        const auto i = static_cast<std::size_t>(it - curve.thresholds.begin());
        a.precision += curve.precision[i];
        a.recall += curve.recall[i];
    }
    a.precision /= static_cast<double>(thresholds.size());
    a.recall /= static_cast<double>(thresholds.size());
    return a;
}

double jacobs_extrapolate(std::span<const double> section_densities, double total_area) {
    if (section_densities.empty()) throw ValidationError("jacobs_extrapolate: no sections");
    if (!(total_area > 0.0)) throw DomainError("jacobs_extrapolate: area must be positive");
    const double mean = std::accumulate(section_densities.begin(), section_densities.end(), 0.0) /
                        static_cast<double>(section_densities.size());
    return mean * total_area;
}

std::vector<Point> decode_impulses(const DensityMap& localization) {
    std::vector<Point> out;
    const auto& g = localization.grid;
    for (int y = 0; y < g.height; ++y)
        for (int x = 0; x < g.width; ++x) {
            const long n = std::lround(g.at(x, y));
            for (long k = 0; k < n; ++k) out.push_back({static_cast<double>(x), static_cast<double>(y)});
        }
    return out;
}

std::vector<Point> peaks_to_image(std::span<const Peak> peaks, int downsample) {
    std::vector<Point> out;
    out.reserve(peaks.size());
    const double half = (downsample - 1) / 2.0;
    for (const Peak& p : peaks)
        out.push_back({static_cast<double>(p.x) * downsample + half, static_cast<double>(p.y) * downsample + half});
    return out;
}

}  // namespace qck
