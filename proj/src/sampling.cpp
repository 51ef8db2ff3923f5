#include "qck/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "qck/model.hpp"

namespace qck {

AnnotationSet clip_annotations(const AnnotationSet& ann, int x0, int y0, int w, int h, std::string id) {
    std::vector<Point> pts;
    for (const Point& p : ann.points()) {
        if (p.x >= x0 && p.x < x0 + w && p.y >= y0 && p.y < y0 + h) pts.push_back({p.x - x0, p.y - y0});
    }
    return AnnotationSet(std::move(id), w, h, std::move(pts));
}

namespace {

// Cumulative origin weights (window count + epsilon) for one patch size over
// a padded image, in row-major origin order.
struct OriginTable {
    int size = 0;
    int nx = 0;
    int ny = 0;
    std::vector<double> cumulative;
};

OriginTable origin_table(const AnnotationSet& ann, int padded_w, int padded_h, int size, double epsilon) {
    // Summed-area table of head counts per pixel.
    std::vector<long> sat(static_cast<std::size_t>(padded_w + 1) * (padded_h + 1), 0);
    auto at = [&](int x, int y) -> long& { return sat[static_cast<std::size_t>(y) * (padded_w + 1) + x]; };
    for (const Point& p : ann.points()) at(static_cast<int>(p.x) + 1, static_cast<int>(p.y) + 1) += 1;
    for (int y = 1; y <= padded_h; ++y)
        for (int x = 1; x <= padded_w; ++x) at(x, y) += at(x - 1, y) + at(x, y - 1) - at(x - 1, y - 1);

    OriginTable t;
    t.size = size;
    t.nx = padded_w - size + 1;
    t.ny = padded_h - size + 1;
    t.cumulative.resize(static_cast<std::size_t>(t.nx) * t.ny);
    double acc = 0.0;
    for (int y = 0; y < t.ny; ++y)
        for (int x = 0; x < t.nx; ++x) {
            const long c = at(x + size, y + size) - at(x, y + size) - at(x + size, y) + at(x, y);
            acc += static_cast<double>(c) + epsilon;
            t.cumulative[static_cast<std::size_t>(y) * t.nx + x] = acc;
        }
    return t;
}

}  // namespace

std::vector<Patch> sample_patches(const GrayImage& image, const AnnotationSet& ann, std::span<const int> sizes, int n,
                                  std::uint64_t seed, double epsilon) {
    if (n < 1) throw ValidationError("sample_patches: n must be at least 1");
    if (sizes.empty()) throw ValidationError("sample_patches: no patch sizes given");
    if (!(epsilon > 0.0)) throw DomainError("sample_patches: epsilon must be positive");
    if (image.width != ann.width() || image.height != ann.height())
        throw ValidationError("sample_patches: image and annotation dimensions differ");
    int largest = 0;
    for (int s : sizes) {
        if (s < 1) throw ValidationError("sample_patches: patch sizes must be positive");
        largest = std::max(largest, s);
    }
    const int pw = std::max(image.width, largest);
    const int ph = std::max(image.height, largest);

    std::map<int, OriginTable> tables;
    for (int s : sizes)
        if (!tables.count(s)) tables.emplace(s, origin_table(ann, pw, ph, s, epsilon));

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<Patch> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int size = sizes[static_cast<std::size_t>(i) % sizes.size()];
        const OriginTable& t = tables.at(size);
        const double r = u01(rng) * t.cumulative.back();
        auto it = std::upper_bound(t.cumulative.begin(), t.cumulative.end(), r);
        if (it == t.cumulative.end()) --it;
        const auto idx = static_cast<int>(it - t.cumulative.begin());
        const int x0 = idx % t.nx;
        const int y0 = idx / t.nx;
        Patch p;
        p.image_id = ann.image_id();
        p.x = x0;
        p.y = y0;
        p.size = size;
        p.pixels = crop_zero_padded(image, x0, y0, size, size);
        p.ann_subset = clip_annotations(ann, x0, y0, size, size, ann.image_id() + "#" + std::to_string(i));
        out.push_back(std::move(p));
    }
    return out;
}

TileGrid tile_image(int width, int height, int cell_size) {
    if (width <= 0 || height <= 0) throw ValidationError("tile_image: image must be nonempty");
    if (cell_size < 1) throw ValidationError("tile_image: cell size must be positive");
    TileGrid g;
    g.cell_size = cell_size;
    g.cols = (width + cell_size - 1) / cell_size;
    g.rows = (height + cell_size - 1) / cell_size;
    g.padded_width = g.cols * cell_size;
    g.padded_height = g.rows * cell_size;
    for (int r = 0; r < g.rows; ++r)
        for (int c = 0; c < g.cols; ++c) g.cells.push_back({c * cell_size, r * cell_size});
    return g;
}

TileGrid tile_image(const GrayImage& image, int cell_size) { return tile_image(image.width, image.height, cell_size); }

Patch extract_cell(const GrayImage& image, const AnnotationSet& ann, const TileGrid& grid, std::size_t index) {
    const CellOrigin& c = grid.cells.at(index);
    Patch p;
    p.image_id = ann.image_id();
    p.x = c.x;
    p.y = c.y;
    p.size = grid.cell_size;
    p.pixels = crop_zero_padded(image, c.x, c.y, grid.cell_size, grid.cell_size);
    p.ann_subset = clip_annotations(ann, c.x, c.y, grid.cell_size, grid.cell_size,
                                    ann.image_id() + "@" + std::to_string(index));
    return p;
}

double aggregate_counts(std::span<const double> cell_counts) {
    double s = 0.0;
    for (double c : cell_counts) s += c;
    return s;
}

TrainSample make_training_sample(const Patch& patch, int input_size, const std::vector<Level>& levels,
                                 const KernelPolicy& policy, int downsample) {
    TrainSample s;
    if (patch.size == input_size) {
        s.patch = to_patch_tensor(patch.pixels);
        s.target = build_target_stack(patch.ann_subset, levels, policy, downsample);
        return s;
    }
    const auto resized = resize_bilinear(patch.pixels, input_size, input_size);
    s.patch = PatchTensor(input_size, input_size, 0.0f);
    for (std::size_t i = 0; i < resized.size(); ++i) s.patch.values[i] = resized[i] / 255.0f;
    const double scale = static_cast<double>(input_size) / patch.size;
    std::vector<Point> pts;
    for (const Point& p : patch.ann_subset.points())
        pts.push_back({std::min(p.x * scale, std::nextafter(static_cast<double>(input_size), 0.0)),
                       std::min(p.y * scale, std::nextafter(static_cast<double>(input_size), 0.0))});
    const AnnotationSet scaled(patch.ann_subset.image_id(), input_size, input_size, std::move(pts));
    s.target = build_target_stack(scaled, levels, policy, downsample);
    return s;
}

}  // namespace qck
