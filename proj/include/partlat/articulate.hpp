// Copyright (C) 2026 The partlat Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "partlat/error.hpp"
#include "partlat/geometry.hpp"

namespace partlat {

using Matrix3 = Eigen::Matrix3d;

struct Svd3 {
    Matrix3 u;
    Eigen::Vector3d singular;  // descending
    Matrix3 v;
};

/// SVD of a 3x3 matrix by one-sided Jacobi rotations (a = u diag(s) v^T).
/// Left vectors for zero singular values are completed to an orthonormal
/// basis, so u is always orthogonal.
inline Svd3 svd3(const Matrix3& a) {
    Matrix3 w = a;
    Matrix3 v = Matrix3::Identity();
    constexpr double eps = 1e-15;
    for (int sweep = 0; sweep < 60; ++sweep) {
        bool rotated = false;
        for (int p = 0; p < 2; ++p) {
            for (int q = p + 1; q < 3; ++q) {
                const double alpha = w.col(p).squaredNorm();
                const double beta = w.col(q).squaredNorm();
                const double gamma = w.col(p).dot(w.col(q));
                if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (Matrix3* m : {&w, &v}) {
                    const Eigen::Vector3d cp = m->col(p), cq = m->col(q);
                    m->col(p) = c * cp - s * cq;
                    m->col(q) = s * cp + c * cq;
                }
            }
        }
        if (!rotated) break;
    }
    std::array<int, 3> order{0, 1, 2};
    Eigen::Vector3d norms(w.col(0).norm(), w.col(1).norm(), w.col(2).norm());
    std::sort(order.begin(), order.end(), [&](int x, int y) { return norms(x) > norms(y); });
    Svd3 out;
    for (int k = 0; k < 3; ++k) {
        out.singular(k) = norms(order[k]);
        out.v.col(k) = v.col(order[k]);
    }
    const double tiny = 1e-14 * std::max(out.singular(0), 1e-300);
    int filled = 0;
    for (int k = 0; k < 3; ++k) {
        if (out.singular(k) > tiny) {
            out.u.col(k) = w.col(order[k]) / out.singular(k);
            filled = k + 1;
        }
    }
    if (filled == 0) {
        out.u = Matrix3::Identity();
    } else if (filled == 1) {
        const Eigen::Vector3d u0 = out.u.col(0);
        Eigen::Index axis = 0;
        u0.cwiseAbs().minCoeff(&axis);
        Eigen::Vector3d e = Eigen::Vector3d::Zero();
        e(axis) = 1.0;
        out.u.col(1) = (e - u0.dot(e) * u0).normalized();
        out.u.col(2) = u0.cross(out.u.col(1));
    } else if (filled == 2) {
        out.u.col(2) = out.u.col(0).cross(out.u.col(1)).normalized();
    }
    return out;
}

struct RigidTransform {
    Matrix3 rotation = Matrix3::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    static RigidTransform identity() { return {}; }

    Point3 apply(const Point3& x) const { return rotation * x + translation; }

    RigidTransform inverse() const {
        const Matrix3 rt = rotation.transpose();
        return {rt, -(rt * translation)};
    }

    bool is_proper(double tol = 1e-9) const {
        return (rotation.transpose() * rotation - Matrix3::Identity()).cwiseAbs().maxCoeff() <= tol &&
               std::abs(rotation.determinant() - 1.0) <= tol;
    }
};

/// a after b.
inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
    return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

inline PointCloud apply_transform(const PointCloud& p, const RigidTransform& t) {
    PointCloud out;
    out.points.reserve(p.size());
    for (const auto& x : p.points) out.points.push_back(t.apply(x));
    if (p.normals) {
        std::vector<Point3> n;
        n.reserve(p.normals->size());
        for (const auto& v : *p.normals) n.push_back(t.rotation * v);
        out.normals = std::move(n);
    }
    return out;
}

struct RigidFit {
    RigidTransform transform;
    double rms_residual = 0.0;
};

/// Least-squares rigid motion taking src onto dst (corresponding points),
/// via the SVD of the cross-covariance with the reflection corrected.
inline RigidFit fit_rigid(const PointCloud& src, const PointCloud& dst) {
    src.validate("fit_rigid: source");
    dst.validate("fit_rigid: target");
    if (src.size() != dst.size())
        throw InputError("fit_rigid needs corresponding points (" + std::to_string(src.size()) + " vs " +
                         std::to_string(dst.size()) + ")");
    if (src.size() < 3) throw InputError("fit_rigid needs at least 3 points");
    const auto n = static_cast<double>(src.size());
    Point3 cs = Point3::Zero(), cd = Point3::Zero();
    for (std::size_t k = 0; k < src.size(); ++k) {
        cs += src.points[k];
        cd += dst.points[k];
    }
    cs /= n;
    cd /= n;
    Matrix3 h = Matrix3::Zero();
    for (std::size_t k = 0; k < src.size(); ++k) h += (src.points[k] - cs) * (dst.points[k] - cd).transpose();
    const Svd3 svd = svd3(h);
    if (!(svd.singular(0) > 0.0) || svd.singular(1) <= 1e-12 * svd.singular(0))
        throw NumericError("fit_rigid: degenerate configuration (cross-covariance rank < 2)");
    Matrix3 fix = Matrix3::Identity();
    if ((svd.v * svd.u.transpose()).determinant() < 0.0) fix(2, 2) = -1.0;
    RigidFit fit;
    fit.transform.rotation = svd.v * fix * svd.u.transpose();
    fit.transform.translation = cd - fit.transform.rotation * cs;
    double sq = 0.0;
    for (std::size_t k = 0; k < src.size(); ++k) sq += (fit.transform.apply(src.points[k]) - dst.points[k]).squaredNorm();
    fit.rms_residual = std::sqrt(sq / n);
    return fit;
}

struct AxisAngle {
    Eigen::Vector3d axis = Eigen::Vector3d::UnitX();
    double angle = 0.0;  // in [0, pi]
};

/// Rotation logarithm, accurate near 0 and near pi.
inline AxisAngle rotation_log(const Matrix3& r) {
    const Eigen::Vector3d skew(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    const double sin_a = 0.5 * skew.norm();
    const double cos_a = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
    AxisAngle out;
    out.angle = std::atan2(sin_a, cos_a);
    if (out.angle == 0.0) return out;
    if (cos_a >= 0.0) {
        out.axis = skew.normalized();
        return out;
    }
    // (R + R^T)/2 - cos(a) I = (1 - cos(a)) n n^T
    const Matrix3 b = 0.5 * (r + r.transpose()) - cos_a * Matrix3::Identity();
    Eigen::Index k = 0;
    b.diagonal().maxCoeff(&k);
    Eigen::Vector3d axis = b.col(k).normalized();
    if (axis.dot(skew) < 0.0) axis = -axis;
    out.axis = axis;
    return out;
}

inline Matrix3 rotation_exp(const Eigen::Vector3d& axis, double angle) {
    return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

/// Geodesic rotation interpolation from the identity (scaled axis-angle),
/// linear in translation. s = 0 gives the identity, s = 1 gives t exactly.
inline RigidTransform interpolate(const RigidTransform& t, double s) {
    if (!(s >= 0.0 && s <= 1.0)) throw InputError("interpolation parameter must lie in [0, 1]");
    if (s == 0.0) return RigidTransform::identity();
    if (s == 1.0) return t;
    const AxisAngle aa = rotation_log(t.rotation);
    return {rotation_exp(aa.axis, s * aa.angle), s * t.translation};
}

/// Splits a cloud by per-point part ids.
inline std::map<int, PointCloud> split_by_part(const PointCloud& cloud, const std::vector<int>& ids) {
    if (ids.size() != cloud.size())
        throw InputError("part index count " + std::to_string(ids.size()) + " differs from point count " +
                         std::to_string(cloud.size()));
    std::map<int, PointCloud> parts;
    for (std::size_t k = 0; k < ids.size(); ++k) parts[ids[k]].points.push_back(cloud.points[k]);
    return parts;
}

/// Union of every part moved by its interpolated transform, in ascending id
/// order.
inline PointCloud reassemble(const std::map<int, PointCloud>& parts, const std::map<int, RigidTransform>& transforms,
                             double s) {
    if (parts.empty()) throw InputError("reassemble needs at least one part");
    PointCloud out;
    for (const auto& [id, cloud] : parts) {
        const auto it = transforms.find(id);
        if (it == transforms.end()) throw InputError("no transform for part " + std::to_string(id));
        const auto moved = apply_transform(cloud, interpolate(it->second, s));
        out.points.insert(out.points.end(), moved.points.begin(), moved.points.end());
    }
    return out;
}

}  // namespace partlat
