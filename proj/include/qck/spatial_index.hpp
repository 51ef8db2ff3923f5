#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "qck/annotations.hpp"

namespace qck {

// Static 2-d tree over a point list for exact nearest-neighbour queries.
class KdTree2 {
public:
    explicit KdTree2(std::span<const Point> points);

    // Squared distance from points[i] to its nearest other point (index != i).
    // Returns +inf when the tree holds fewer than two points.
    [[nodiscard]] double nearest_other_sq(std::size_t i) const;

private:
    struct Node {
        std::size_t point;
        int axis;
        int left = -1;
        int right = -1;
    };

    int build(std::span<std::size_t> idx, int depth);
    void search(int node, const Point& q, std::size_t self, double& best) const;

    std::span<const Point> points_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

}  // namespace qck
