#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "qck/raster.hpp"

namespace qck {

struct Point {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const Point&) const = default;
};

// Head locations for one image. Coordinates are real-valued pixels; every
// point satisfies 0 <= x < width and 0 <= y < height.
class AnnotationSet {
public:
    AnnotationSet() = default;
    // Throws ValidationError naming the first out-of-bounds point.
    AnnotationSet(std::string image_id, int width, int height, std::vector<Point> points);

    [[nodiscard]] const std::string& image_id() const noexcept { return image_id_; }
    [[nodiscard]] int width() const noexcept { return width_; }
    [[nodiscard]] int height() const noexcept { return height_; }
    [[nodiscard]] const std::vector<Point>& points() const noexcept { return points_; }
    [[nodiscard]] std::size_t count() const noexcept { return points_.size(); }

    bool operator==(const AnnotationSet&) const = default;

private:
    std::string image_id_;
    int width_ = 0;
    int height_ = 0;
    std::vector<Point> points_;
};

AnnotationSet parse_annotations(const std::string& json_text);
AnnotationSet load_annotations(const std::string& path);
std::string to_json(const AnnotationSet& ann);
void save_annotations(const std::string& path, const AnnotationSet& ann);

// Exact nearest-neighbour bandwidths: sigma_i = min(dist to nearest other
// point, tau). A lone point gets tau. Uses a k-d tree above 256 points.
std::vector<double> nn_bandwidths(const AnnotationSet& ann, double tau);
// Brute-force O(N^2) version of the above.
std::vector<double> nn_bandwidths_brute(const AnnotationSet& ann, double tau);

struct UniformLayout {};
struct ClusteredLayout {
    int n_clusters = 4;
    double spread = 20.0;  // std-dev of each cluster, pixels
};
using SceneLayout = std::variant<UniformLayout, ClusteredLayout>;

struct SceneSpec {
    int width = 224;
    int height = 224;
    int n_points = 50;
    SceneLayout layout = UniformLayout{};
    double blob_sigma = 2.0;
    std::uint64_t seed = 0;
    std::string image_id = "scene";
};

struct SyntheticScene {
    GrayImage image;
    AnnotationSet annotations;
};

// Renders one bright isotropic blob per head on a dark background. Head
// positions are integer pixel coordinates. Deterministic in `spec.seed`.
SyntheticScene gen_synthetic_scene(const SceneSpec& spec);

struct StatsReport {
    std::size_t n_images = 0;
    std::size_t n_annotations = 0;
    double min_count = 0.0;
    double max_count = 0.0;
    double mean_count = 0.0;
    double median_count = 0.0;
    double mean_height = 0.0;
    double mean_width = 0.0;
    double mean_density = 0.0;  // mean over images of N / (width * height)
};

StatsReport dataset_stats(const std::vector<AnnotationSet>& sets);

}  // namespace qck
