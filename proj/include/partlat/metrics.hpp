// Copyright (C) 2026 The partlat Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "partlat/error.hpp"
#include "partlat/geometry.hpp"
#include "partlat/parallel.hpp"

namespace partlat {

inline constexpr int kDefaultVoxelResolution = 64;
inline constexpr double kDefaultFscoreThreshold = 0.005;
inline constexpr std::size_t kBruteForceLimit = 256;
inline constexpr std::size_t kExactEmdLimit = 2048;

inline double squared_distance(const Point3& a, const Point3& b) {
    const double dx = a.x() - b.x();
    const double dy = a.y() - b.y();
    const double dz = a.z() - b.z();
    return dx * dx + dy * dy + dz * dz;
}

// ---------------------------------------------------------------------------
// Nearest neighbours

/// Static k-d tree over a point set. Queries return exactly the same squared
/// distance as a linear scan: the pruning test only skips subtrees whose
/// points are provably no closer.
class KdTree {
public:
    explicit KdTree(const std::vector<Point3>& points) : points_(points) {
        order_.resize(points.size());
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        nodes_.reserve(points.size());
        if (!points.empty()) build(0, points.size(), 0);
    }

    double nearest_squared(const Point3& q) const {
        double best = std::numeric_limits<double>::infinity();
        if (!nodes_.empty()) search(0, q, best);
        return best;
    }

private:
    struct Node {
        std::size_t point = 0;
        int axis = 0;
        std::int64_t left = -1;
        std::int64_t right = -1;
    };

    std::int64_t build(std::size_t lo, std::size_t hi, int depth) {
        if (lo >= hi) return -1;
        const int axis = depth % 3;
        const std::size_t mid = lo + (hi - lo) / 2;
        std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(lo), order_.begin() + static_cast<std::ptrdiff_t>(mid),
                         order_.begin() + static_cast<std::ptrdiff_t>(hi), [&](std::size_t a, std::size_t b) {
                             return points_[a](axis) < points_[b](axis);
                         });
        const auto id = static_cast<std::int64_t>(nodes_.size());
        nodes_.push_back({order_[mid], axis, -1, -1});
        const auto left = build(lo, mid, depth + 1);
        const auto right = build(mid + 1, hi, depth + 1);
        nodes_[static_cast<std::size_t>(id)].left = left;
        nodes_[static_cast<std::size_t>(id)].right = right;
        return id;
    }

    void search(std::int64_t id, const Point3& q, double& best) const {
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        const Point3& p = points_[n.point];
        best = std::min(best, squared_distance(q, p));
        const double diff = q(n.axis) - p(n.axis);
        const auto near = diff < 0 ? n.left : n.right;
        const auto far = diff < 0 ? n.right : n.left;
        if (near >= 0) search(near, q, best);
        if (far >= 0 && diff * diff <= best) search(far, q, best);
    }

    const std::vector<Point3>& points_;
    std::vector<std::size_t> order_;
    std::vector<Node> nodes_;
};

/// Squared distance from every query point to its nearest neighbour in `ref`.
inline std::vector<double> nearest_squared_distances(const std::vector<Point3>& queries,
                                                     const std::vector<Point3>& ref) {
    std::vector<double> out(queries.size());
    if (ref.size() <= kBruteForceLimit) {
        for (std::size_t i = 0; i < queries.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& r : ref) best = std::min(best, squared_distance(queries[i], r));
            out[i] = best;
        }
        return out;
    }
    const KdTree tree(ref);
    parallel_for(queries.size(), [&](std::size_t i) { out[i] = tree.nearest_squared(queries[i]); });
    return out;
}

// ---------------------------------------------------------------------------
// Chamfer distance

enum class ChamferForm { Squared, Euclidean };

/// Mean nearest-neighbour distance from a to b plus the same from b to a.
/// The squared form is the default.
inline double chamfer(const PointCloud& a, const PointCloud& b, ChamferForm form = ChamferForm::Squared) {
    a.validate("chamfer: first cloud");
    b.validate("chamfer: second cloud");
    auto directed = [&](const PointCloud& from, const PointCloud& to) {
        const auto d2 = nearest_squared_distances(from.points, to.points);
        double sum = 0.0;
        for (double v : d2) sum += form == ChamferForm::Squared ? v : std::sqrt(v);
        return sum / static_cast<double>(d2.size());
    };
    return directed(a, b) + directed(b, a);
}

// ---------------------------------------------------------------------------
// Earth mover's distance

/// Minimum-cost perfect assignment on a square cost matrix (Hungarian method
/// with potentials, O(n^3)). Returns the column assigned to each row.
inline std::vector<int> hungarian_assignment(const Eigen::MatrixXd& cost) {
    const auto n = static_cast<int>(cost.rows());
    if (cost.cols() != n) throw DimensionError("assignment needs a square cost matrix");
    const double inf = std::numeric_limits<double>::infinity();
    // 1-based arrays; column 0 is a virtual start.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<int> match(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const int i0 = match[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const int j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(static_cast<std::size_t>(n));
    for (int j = 1; j <= n; ++j) row_to_col[static_cast<std::size_t>(match[j] - 1)] = j - 1;
    return row_to_col;
}

inline Eigen::MatrixXd euclidean_cost(const std::vector<Point3>& a, const std::vector<Point3>& b) {
    Eigen::MatrixXd c(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j)
            c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::sqrt(squared_distance(a[i], b[j]));
    return c;
}

enum class EmdMode { Auto, Exact, Entropic };

struct SinkhornOptions {
    double epsilon = 1e-3;  // relative to the largest cost
    int max_iterations = 2000;
    double tolerance = 1e-9;
};

struct EmdResult {
    double value = 0.0;         // mean transport cost per unit mass
    double duality_gap = 0.0;   // 0 in exact mode; exact optimum lies in [value - gap, value]
    EmdMode mode = EmdMode::Exact;
    int iterations = 0;
};

namespace detail {

inline double log_sum_exp(const Eigen::VectorXd& v) {
    const double m = v.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((v.array() - m).exp().sum());
}

/// Log-domain Sinkhorn between uniform marginals. The returned value is the
/// cost of the rounded (exactly feasible) plan, so it bounds the optimum from
/// above; the c-transformed dual bounds it from below.
inline EmdResult sinkhorn_emd(const std::vector<Point3>& a, const std::vector<Point3>& b, const SinkhornOptions& opt) {
    const Eigen::MatrixXd cost = euclidean_cost(a, b);
    const auto n = cost.rows();
    const auto m = cost.cols();
    const Eigen::VectorXd mu = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    const Eigen::VectorXd nu = Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
    const double eps = opt.epsilon * std::max(cost.maxCoeff(), 1e-12);
    Eigen::VectorXd f = Eigen::VectorXd::Zero(n), g = Eigen::VectorXd::Zero(m);
    const double log_mu = std::log(1.0 / static_cast<double>(n));
    const double log_nu = std::log(1.0 / static_cast<double>(m));

    auto plan = [&]() {
        Eigen::MatrixXd p(n, m);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < m; ++j) p(i, j) = std::exp((f(i) + g(j) - cost(i, j)) / eps);
        return p;
    };

    EmdResult res;
    res.mode = EmdMode::Entropic;
    Eigen::VectorXd tmp_m(m), tmp_n(n);
    for (int it = 0; it < opt.max_iterations; ++it) {
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < m; ++j) tmp_m(j) = (g(j) - cost(i, j)) / eps;
            f(i) = eps * (log_mu - log_sum_exp(tmp_m));
        }
        double err = 0.0;
        for (Eigen::Index j = 0; j < m; ++j) {
            for (Eigen::Index i = 0; i < n; ++i) tmp_n(i) = (f(i) - cost(i, j)) / eps;
            const double g_new = eps * (log_nu - log_sum_exp(tmp_n));
            // Column marginal error before this update, f already row-feasible.
            err += std::abs(std::exp((g(j) - g_new) / eps) - 1.0) / static_cast<double>(m);
            g(j) = g_new;
        }
        res.iterations = it + 1;
        if (err < opt.tolerance) break;
    }

    // Round onto the transport polytope.
    Eigen::MatrixXd p = plan();
    const Eigen::VectorXd row_scale = (mu.array() / p.rowwise().sum().array()).min(1.0);
    p = row_scale.asDiagonal() * p;
    const Eigen::VectorXd col_scale = (nu.array() / p.colwise().sum().transpose().array()).min(1.0);
    p = p * col_scale.asDiagonal();
    const Eigen::VectorXd err_r = mu - p.rowwise().sum();
    const Eigen::VectorXd err_c = nu - p.colwise().sum().transpose();
    const double deficit = err_r.sum();
    if (deficit > 0.0) p += err_r * err_c.transpose() / deficit;
    const double primal = (p.array() * cost.array()).sum();

    // Feasible dual via the c-transform of f.
    Eigen::VectorXd g_feasible(m);
    for (Eigen::Index j = 0; j < m; ++j) g_feasible(j) = (cost.col(j) - f).minCoeff();
    const double dual = mu.dot(f) + nu.dot(g_feasible);
    res.value = primal;
    res.duality_gap = std::max(0.0, primal - dual);
    return res;
}

}  // namespace detail

/// Earth mover's distance with Euclidean ground cost, reported per unit mass.
/// Auto picks exact assignment for equal sizes up to 2048 points.
inline EmdResult emd(const PointCloud& a, const PointCloud& b, EmdMode mode = EmdMode::Auto,
                     const SinkhornOptions& sinkhorn = {}) {
    a.validate("emd: first cloud");
    b.validate("emd: second cloud");
    if (mode == EmdMode::Auto)
        mode = a.size() == b.size() && a.size() <= kExactEmdLimit ? EmdMode::Exact : EmdMode::Entropic;
    if (mode == EmdMode::Entropic) return detail::sinkhorn_emd(a.points, b.points, sinkhorn);
    if (a.size() != b.size())
        throw InputError("exact EMD needs equal point counts (" + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()) + ")");
    const Eigen::MatrixXd cost = euclidean_cost(a.points, b.points);
    const auto assignment = hungarian_assignment(cost);
    double total = 0.0;
    for (std::size_t i = 0; i < assignment.size(); ++i)
        total += cost(static_cast<Eigen::Index>(i), assignment[i]);
    return {total / static_cast<double>(a.size()), 0.0, EmdMode::Exact, 0};
}

// ---------------------------------------------------------------------------
// Voxel occupancy

struct VoxelFrame {
    Point3 min = Point3::Constant(-1.0);
    Point3 max = Point3::Constant(1.0);

    void validate() const {
        if (!min.allFinite() || !max.allFinite() || !(min.array() < max.array()).all())
            throw InputError("degenerate voxel frame");
    }
    friend bool operator==(const VoxelFrame& a, const VoxelFrame& b) { return a.min == b.min && a.max == b.max; }
};

inline bool frame_contains(const VoxelFrame& frame, const Point3& x) {
    return (x.array() >= frame.min.array()).all() && (x.array() <= frame.max.array()).all();
}

class VoxelGrid {
public:
    VoxelGrid(int resolution, VoxelFrame frame) : resolution_(resolution), frame_(frame) {
        if (resolution < 2) throw InputError("voxel resolution must be at least 2");
        frame_.validate();
        const auto cells = static_cast<std::size_t>(resolution) * resolution * resolution;
        words_.assign((cells + 63) / 64, 0);
    }

    int resolution() const { return resolution_; }
    const VoxelFrame& frame() const { return frame_; }
    const std::vector<std::uint64_t>& words() const { return words_; }

    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * resolution_ + static_cast<std::size_t>(j)) * resolution_ +
               static_cast<std::size_t>(k);
    }
    void set(int i, int j, int k) {
        const auto c = index(i, j, k);
        words_[c / 64] |= std::uint64_t{1} << (c % 64);
    }
    bool get(int i, int j, int k) const {
        const auto c = index(i, j, k);
        return (words_[c / 64] >> (c % 64)) & 1U;
    }
    std::size_t count() const {
        std::size_t n = 0;
        for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
        return n;
    }
    bool compatible(const VoxelGrid& o) const { return resolution_ == o.resolution_ && frame_ == o.frame_; }

private:
    int resolution_;
    VoxelFrame frame_;
    std::vector<std::uint64_t> words_;
};

struct VoxelizeResult {
    VoxelGrid grid;
    std::size_t dropped = 0;  // points outside the frame
};

/// Cell index per axis is floor((x - min) / cell), with points on the max
/// face clamped into the last cell.
inline VoxelizeResult voxelize(const PointCloud& p, const VoxelFrame& frame = {},
                               int resolution = kDefaultVoxelResolution) {
    VoxelizeResult out{VoxelGrid(resolution, frame), 0};
    const Point3 cell = (frame.max - frame.min) / static_cast<double>(resolution);
    for (const auto& x : p.points) {
        if (!x.allFinite() || !frame_contains(frame, x)) {
            ++out.dropped;
            continue;
        }
        int idx[3];
        for (int a = 0; a < 3; ++a)
            idx[a] = std::min(resolution - 1, static_cast<int>(std::floor((x(a) - frame.min(a)) / cell(a))));
        out.grid.set(idx[0], idx[1], idx[2]);
    }
    return out;
}

inline double grid_iou(const VoxelGrid& a, const VoxelGrid& b) {
    if (!a.compatible(b)) throw InputError("voxel grids differ in resolution or frame");
    std::size_t inter = 0, uni = 0;
    for (std::size_t w = 0; w < a.words().size(); ++w) {
        inter += static_cast<std::size_t>(std::popcount(a.words()[w] & b.words()[w]));
        uni += static_cast<std::size_t>(std::popcount(a.words()[w] | b.words()[w]));
    }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// Mean IoU over unordered part pairs; a pair of empty grids contributes 0.
inline double pairwise_iou(const std::vector<VoxelGrid>& parts) {
    if (parts.size() < 2) throw InputError("pairwise IoU needs at least two parts");
    for (const auto& g : parts)
        if (!g.compatible(parts.front())) throw InputError("voxel grids differ in resolution or frame");
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < parts.size(); ++i)
        for (std::size_t j = i + 1; j < parts.size(); ++j) pairs.emplace_back(i, j);
    std::vector<double> ious(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t k) { ious[k] = grid_iou(parts[pairs[k].first], parts[pairs[k].second]); });
    double sum = 0.0;
    for (double v : ious) sum += v;
    return sum / static_cast<double>(pairs.size());
}

// ---------------------------------------------------------------------------
// F-score

struct FscoreResult {
    double precision = 0.0;
    double recall = 0.0;
    double fscore = 0.0;
};

inline FscoreResult fscore(const PointCloud& pred, const PointCloud& gt, double tau = kDefaultFscoreThreshold) {
    pred.validate("fscore: prediction");
    gt.validate("fscore: reference");
    if (!(tau > 0.0)) throw InputError("F-score threshold must be positive");
    auto fraction_within = [&](const PointCloud& from, const PointCloud& to) {
        const auto d2 = nearest_squared_distances(from.points, to.points);
        std::size_t hit = 0;
        for (double v : d2)
            if (std::sqrt(v) <= tau) ++hit;
        return static_cast<double>(hit) / static_cast<double>(d2.size());
    };
    FscoreResult r;
    r.precision = fraction_within(pred, gt);
    r.recall = fraction_within(gt, pred);
    const double s = r.precision + r.recall;
    r.fscore = s == 0.0 ? 0.0 : 2.0 * r.precision * r.recall / s;
    return r;
}

/// Inner product of two L2-normalized embedding vectors. Pass-through utility
/// for scores computed from externally produced embeddings.
inline double normalized_inner_product(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size()) throw DimensionError("embedding widths differ");
    const double na = a.norm(), nb = b.norm();
    if (na == 0.0 || nb == 0.0) throw NumericError("cannot normalize a zero embedding");
    return a.dot(b) / (na * nb);
}

}  // namespace partlat
