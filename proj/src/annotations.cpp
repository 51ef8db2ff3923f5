#include "qck/annotations.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "qck/spatial_index.hpp"

namespace qck {

using nlohmann::json;

AnnotationSet::AnnotationSet(std::string image_id, int width, int height, std::vector<Point> points)
    : image_id_(std::move(image_id)), width_(width), height_(height), points_(std::move(points)) {
    if (width_ <= 0 || height_ <= 0) throw ValidationError("annotation image dimensions must be positive");
    for (std::size_t i = 0; i < points_.size(); ++i) {
        const Point& p = points_[i];
        if (!(p.x >= 0.0 && p.x < width_ && p.y >= 0.0 && p.y < height_)) {
            std::ostringstream msg;
            msg << "point " << i << " (" << p.x << ", " << p.y << ") lies outside the " << width_ << "x" << height_
                << " image";
            throw ValidationError(msg.str());
        }
    }
}

namespace {

std::string line_context(const std::string& text, std::size_t byte) {
    byte = std::min(byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n');
    const auto start = text.rfind('\n', byte == 0 ? 0 : byte - 1);
    const auto begin = start == std::string::npos ? 0 : start + 1;
    const auto end = text.find('\n', begin);
    std::ostringstream out;
    out << "line " << line << ": " << text.substr(begin, end == std::string::npos ? std::string::npos : end - begin);
    return out.str();
}

}  // namespace

AnnotationSet parse_annotations(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("annotation JSON parse error at ") + line_context(json_text, e.byte) + " (" +
                          e.what() + ")");
    }
    try {
        if (!doc.is_object()) throw FormatError("annotation JSON must be an object");
        std::vector<Point> points;
        for (const auto& p : doc.at("points")) {
            if (!p.is_array() || p.size() != 2) throw FormatError("each point must be an [x, y] array");
            points.push_back({p[0].get<double>(), p[1].get<double>()});
        }
        return AnnotationSet(doc.at("image_id").get<std::string>(), doc.at("width").get<int>(),
                             doc.at("height").get<int>(), std::move(points));
    } catch (const json::exception& e) {
        throw FormatError(std::string("annotation JSON schema error: ") + e.what());
    }
}

AnnotationSet load_annotations(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open annotation file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_annotations(buf.str());
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

std::string to_json(const AnnotationSet& ann) {
    json pts = json::array();
    for (const Point& p : ann.points()) pts.push_back({p.x, p.y});
    json doc = {{"image_id", ann.image_id()}, {"width", ann.width()}, {"height", ann.height()}, {"points", pts}};
    return doc.dump();
}

void save_annotations(const std::string& path, const AnnotationSet& ann) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write annotation file " + path);
    out << to_json(ann) << '\n';
    if (!out) throw IoError("write failed for " + path);
}

namespace {

constexpr std::size_t kBruteForceLimit = 256;

void check_tau(double tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw DomainError("tau must be positive and finite");
}

}  // namespace

std::vector<double> nn_bandwidths_brute(const AnnotationSet& ann, double tau) {
    check_tau(tau);
    const auto& pts = ann.points();
    std::vector<double> sigma(pts.size(), tau);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < pts.size(); ++j) {
            if (j == i) continue;
            const double dx = pts[i].x - pts[j].x;
            const double dy = pts[i].y - pts[j].y;
            best = std::min(best, dx * dx + dy * dy);
        }
        sigma[i] = std::min(std::sqrt(best), tau);
    }
    return sigma;
}

std::vector<double> nn_bandwidths(const AnnotationSet& ann, double tau) {
    if (ann.count() <= kBruteForceLimit) return nn_bandwidths_brute(ann, tau);
    check_tau(tau);
    const KdTree2 tree(ann.points());
    std::vector<double> sigma(ann.count());
    for (std::size_t i = 0; i < sigma.size(); ++i) sigma[i] = std::min(std::sqrt(tree.nearest_other_sq(i)), tau);
    return sigma;
}

SyntheticScene gen_synthetic_scene(const SceneSpec& spec) {
    if (spec.width <= 0 || spec.height <= 0) throw ValidationError("scene dimensions must be positive");
    if (spec.n_points < 0) throw ValidationError("n_points must be nonnegative");
    if (!(spec.blob_sigma > 0.0)) throw ValidationError("blob_sigma must be positive");
    if (const auto* c = std::get_if<ClusteredLayout>(&spec.layout)) {
        if (!(c->spread > 0.0)) throw ValidationError("cluster spread must be positive");
        if (c->n_clusters < 1) throw ValidationError("n_clusters must be at least 1");
    }
    const double area = static_cast<double>(spec.width) * spec.height;
    if (static_cast<double>(spec.n_points) > area) {
        throw DomainError("infeasible scene: mean head spacing below one pixel");
    }

    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> ux(0.0, spec.width);
    std::uniform_real_distribution<double> uy(0.0, spec.height);

    auto snap = [&](double x, double y) {
        return Point{std::clamp(std::floor(x), 0.0, spec.width - 1.0), std::clamp(std::floor(y), 0.0, spec.height - 1.0)};
    };

    std::vector<Point> pts;
    pts.reserve(static_cast<std::size_t>(spec.n_points));
    if (std::holds_alternative<UniformLayout>(spec.layout)) {
        for (int i = 0; i < spec.n_points; ++i) {
            const double x = ux(rng);
            const double y = uy(rng);
            pts.push_back(snap(x, y));
        }
    } else {
        const auto& c = std::get<ClusteredLayout>(spec.layout);
        std::vector<Point> centers;
        for (int i = 0; i < c.n_clusters; ++i) {
            const double x = ux(rng);
            const double y = uy(rng);
            centers.push_back({x, y});
        }
        std::uniform_int_distribution<int> pick(0, c.n_clusters - 1);
        std::normal_distribution<double> offset(0.0, c.spread);
        for (int i = 0; i < spec.n_points; ++i) {
            const Point& ctr = centers[static_cast<std::size_t>(pick(rng))];
            double x = 0, y = 0;
            // Redraw out-of-image offsets; a handful of tries is enough for any
            // spread, after which the point is clamped to the border.
            for (int attempt = 0; attempt < 16; ++attempt) {
                x = ctr.x + offset(rng);
                y = ctr.y + offset(rng);
                if (x >= 0 && x < spec.width && y >= 0 && y < spec.height) break;
            }
            pts.push_back(snap(x, y));
        }
    }

    constexpr double kBackground = 16.0;
    constexpr double kAmplitude = 200.0;
    constexpr double kNoise = 4.0;
    Raster<double> light(spec.width, spec.height, 0.0);
    const double s2 = 2.0 * spec.blob_sigma * spec.blob_sigma;
    const int r = static_cast<int>(std::ceil(4.0 * spec.blob_sigma));
    for (const Point& p : pts) {
        const int px = static_cast<int>(p.x);
        const int py = static_cast<int>(p.y);
        for (int y = std::max(0, py - r); y <= std::min(spec.height - 1, py + r); ++y) {
            for (int x = std::max(0, px - r); x <= std::min(spec.width - 1, px + r); ++x) {
                const double dx = x + 0.5 - p.x;
                const double dy = y + 0.5 - p.y;
                light.at(x, y) += std::exp(-(dx * dx + dy * dy) / s2);
            }
        }
    }
    GrayImage image(spec.width, spec.height);
    std::uniform_real_distribution<double> noise(-kNoise, kNoise);
    for (std::size_t i = 0; i < image.size(); ++i) {
        const double v = kBackground + kAmplitude * light.values[i] + noise(rng);
        image.values[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
    return {std::move(image), AnnotationSet(spec.image_id, spec.width, spec.height, std::move(pts))};
}

StatsReport dataset_stats(const std::vector<AnnotationSet>& sets) {
    if (sets.empty()) throw ValidationError("dataset_stats needs at least one annotation set");
    StatsReport r;
    r.n_images = sets.size();
    std::vector<double> counts;
    counts.reserve(sets.size());
    double sum_w = 0, sum_h = 0, sum_density = 0;
    for (const auto& s : sets) {
        const double n = static_cast<double>(s.count());
        counts.push_back(n);
        r.n_annotations += s.count();
        sum_w += s.width();
        sum_h += s.height();
        sum_density += n / (static_cast<double>(s.width()) * s.height());
    }
    const double n_img = static_cast<double>(sets.size());
    std::sort(counts.begin(), counts.end());
    r.min_count = counts.front();
    r.max_count = counts.back();
    r.mean_count = static_cast<double>(r.n_annotations) / n_img;
    const std::size_t mid = counts.size() / 2;
    r.median_count = counts.size() % 2 ? counts[mid] : 0.5 * (counts[mid - 1] + counts[mid]);
    r.mean_width = sum_w / n_img;
    r.mean_height = sum_h / n_img;
    r.mean_density = sum_density / n_img;
    return r;
}

}  // namespace qck
