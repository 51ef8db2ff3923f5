#include "qck/spatial_index.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace qck {

namespace {

double coord(const Point& p, int axis) { return axis == 0 ? p.x : p.y; }

}  // namespace

KdTree2::KdTree2(std::span<const Point> points) : points_(points) {
    std::vector<std::size_t> idx(points.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    nodes_.reserve(points.size());
    root_ = build(idx, 0);
}

int KdTree2::build(std::span<std::size_t> idx, int depth) {
    if (idx.empty()) return -1;
    const int axis = depth % 2;
    const std::size_t mid = idx.size() / 2;
    std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(mid), idx.end(),
                     [&](std::size_t a, std::size_t b) { return coord(points_[a], axis) < coord(points_[b], axis); });
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({idx[mid], axis});
    const int left = build(idx.subspan(0, mid), depth + 1);
    const int right = build(idx.subspan(mid + 1), depth + 1);
    nodes_[static_cast<std::size_t>(id)].left = left;
    nodes_[static_cast<std::size_t>(id)].right = right;
    return id;
}

void KdTree2::search(int node, const Point& q, std::size_t self, double& best) const {
    if (node < 0) return;
    const Node& n = nodes_[static_cast<std::size_t>(node)];
    const Point& p = points_[n.point];
    if (n.point != self) {
        const double dx = p.x - q.x;
        const double dy = p.y - q.y;
        best = std::min(best, dx * dx + dy * dy);
    }
    const double diff = coord(q, n.axis) - coord(p, n.axis);
    const int near = diff < 0 ? n.left : n.right;
    const int far = diff < 0 ? n.right : n.left;
    search(near, q, self, best);
    if (diff * diff <= best) search(far, q, self, best);
}

double KdTree2::nearest_other_sq(std::size_t i) const {
    double best = std::numeric_limits<double>::infinity();
    search(root_, points_[i], i, best);
    return best;
}

}  // namespace qck
