// Copyright (C) 2026 The partlat Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "partlat/error.hpp"

namespace partlat {

using Point3 = Eigen::Vector3d;

struct PointCloud {
    std::vector<Point3> points;
    std::optional<std::vector<Point3>> normals;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }

    void validate(const char* what = "point cloud") const {
        if (points.empty()) throw InputError(std::string(what) + " is empty");
        for (const auto& p : points)
            if (!p.allFinite()) throw InputError(std::string(what) + " has non-finite coordinates");
        if (normals && normals->size() != points.size())
            throw InputError(std::string(what) + ": normal count differs from point count");
    }
};

/// Axis-aligned box. Axes: x right, y forward, z up.
struct Aabb {
    Point3 min = Point3::Zero();
    Point3 max = Point3::Zero();

    bool valid() const { return (min.array() <= max.array()).all(); }
    double extent(int axis) const { return max(axis) - min(axis); }
    Point3 extents() const { return max - min; }
    Point3 center() const { return 0.5 * (min + max); }
    double volume() const { return extent(0) * extent(1) * extent(2); }
    double diagonal() const { return (max - min).norm(); }

    bool contains(const Point3& p) const { return (p.array() >= min.array()).all() && (p.array() <= max.array()).all(); }
    bool contains(const Aabb& other) const { return contains(other.min) && contains(other.max); }

    friend bool operator==(const Aabb& a, const Aabb& b) { return a.min == b.min && a.max == b.max; }
};

inline Aabb box_union(const Aabb& a, const Aabb& b) { return {a.min.cwiseMin(b.min), a.max.cwiseMax(b.max)}; }

// Length of the overlap of the two boxes along `axis` (0 when disjoint).
inline double overlap_length(const Aabb& a, const Aabb& b, int axis) {
    return std::max(0.0, std::min(a.max(axis), b.max(axis)) - std::max(a.min(axis), b.min(axis)));
}

inline double intersection_volume(const Aabb& a, const Aabb& b) {
    return overlap_length(a, b, 0) * overlap_length(a, b, 1) * overlap_length(a, b, 2);
}

// Euclidean distance between the closest points of two boxes; 0 when they touch or overlap.
inline double box_gap(const Aabb& a, const Aabb& b) {
    double sq = 0.0;
    for (int axis = 0; axis < 3; ++axis) {
        const double sep = std::max({0.0, b.min(axis) - a.max(axis), a.min(axis) - b.max(axis)});
        sq += sep * sep;
    }
    return std::sqrt(sq);
}

inline double box_iou(const Aabb& a, const Aabb& b) {
    const double inter = intersection_volume(a, b);
    const double uni = a.volume() + b.volume() - inter;
    if (uni <= 0.0) return a == b ? 1.0 : 0.0;
    return inter / uni;
}

inline Aabb compute_aabb(const PointCloud& cloud) {
    if (cloud.points.empty()) throw InputError("compute_aabb: empty point cloud");
    Aabb box{cloud.points.front(), cloud.points.front()};
    for (const auto& p : cloud.points) {
        box.min = box.min.cwiseMin(p);
        box.max = box.max.cwiseMax(p);
    }
    return box;
}

}  // namespace partlat
