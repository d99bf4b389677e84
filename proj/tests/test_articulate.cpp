// Copyright (C) 2026 The partlat Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <numbers>

#include "oracles.hpp"
#include "partlat/articulate.hpp"

using namespace partlat;

namespace {

PointCloud random_cloud(std::size_t n, Rng& rng) {
    PointCloud c;
    for (std::size_t k = 0; k < n; ++k) c.points.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    return c;
}

PointCloud moved(const PointCloud& c, const Matrix3& r, const Eigen::Vector3d& t) {
    PointCloud out;
    for (const auto& p : c.points) out.points.push_back(r * p + t);
    return out;
}

double max_abs3(const Matrix3& a, const Matrix3& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST(Svd3, ReconstructsAndOrthonormal) {
    Rng rng(1);
    for (int trial = 0; trial < 200; ++trial) {
        Matrix3 a;
        for (int k = 0; k < 9; ++k) a(k / 3, k % 3) = rng.normal();
        if (trial % 10 == 0) a.col(2) = a.col(0) + a.col(1);  // rank 2
        const auto s = svd3(a);
        EXPECT_LT(max_abs3(s.u * s.singular.asDiagonal() * s.v.transpose(), a), 1e-10);
        EXPECT_LT(max_abs3(s.u.transpose() * s.u, Matrix3::Identity()), 1e-10);
        EXPECT_LT(max_abs3(s.v.transpose() * s.v, Matrix3::Identity()), 1e-10);
        EXPECT_GE(s.singular(0), s.singular(1));
        EXPECT_GE(s.singular(1), s.singular(2));
        EXPECT_GE(s.singular(2), 0.0);
    }
}

TEST(FitRigid, RecoversRandomAndNearHalfTurnMotions) {
    Rng rng(2);
    for (int trial = 0; trial < 500; ++trial) {
        Matrix3 r;
        if (trial % 5 == 0) {
            const Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
            const double angle = std::numbers::pi - (trial % 3 == 0 ? 0.0 : std::pow(10.0, -rng.uniform(1, 8)));
            r = oracle::rodrigues(axis, angle);
        } else {
            r = oracle::random_rotation(rng);
        }
        const Eigen::Vector3d t(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
        const auto src = random_cloud(static_cast<std::size_t>(rng.uniform_int(3, 40)), rng);
        const auto fit = fit_rigid(src, moved(src, r, t));
        EXPECT_LT(max_abs3(fit.transform.rotation, r), 1e-6) << "trial " << trial;
        EXPECT_LT((fit.transform.translation - t).cwiseAbs().maxCoeff(), 1e-6);
        EXPECT_NEAR(fit.transform.rotation.determinant(), 1.0, 1e-9);
        EXPECT_LT(fit.rms_residual, 1e-9);
    }
}

TEST(FitRigid, MirroredTargetStillGivesProperRotation) {
    Rng rng(3);
    const auto src = random_cloud(20, rng);
    PointCloud dst = src;
    for (auto& p : dst.points) p.x() = -p.x();
    const auto fit = fit_rigid(src, dst);
    EXPECT_TRUE(fit.transform.is_proper());
    EXPECT_GT(fit.rms_residual, 0.0);
}

TEST(FitRigid, Errors) {
    PointCloud line;
    for (int k = 0; k < 5; ++k) line.points.emplace_back(k, 2 * k, 0);
    EXPECT_THROW(fit_rigid(line, line), NumericError);
    Rng rng(4);
    const auto a = random_cloud(2, rng);
    EXPECT_THROW(fit_rigid(a, a), InputError);
    EXPECT_THROW(fit_rigid(random_cloud(4, rng), random_cloud(5, rng)), InputError);
}

TEST(RotationLog, RoundTripIncludingHalfTurn) {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const Eigen::Vector3d axis = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()).normalized();
        const double angle = trial % 4 == 0 ? std::numbers::pi - 1e-9 * trial : rng.uniform(0, std::numbers::pi);
        const Matrix3 r = oracle::rodrigues(axis, angle);
        const auto aa = rotation_log(r);
        EXPECT_NEAR(aa.angle, angle, 1e-7);
        EXPECT_LT(max_abs3(rotation_exp(aa.axis, aa.angle), r), 1e-9);
    }
    EXPECT_EQ(rotation_log(Matrix3::Identity()).angle, 0.0);
}

TEST(Interpolate, Endpoints) {
    Rng rng(6);
    RigidTransform t{oracle::random_rotation(rng), Eigen::Vector3d(1, 2, 3)};
    const auto zero = interpolate(t, 0.0);
    EXPECT_EQ(zero.rotation, Matrix3::Identity());
    EXPECT_EQ(zero.translation, Eigen::Vector3d::Zero());
    const auto one = interpolate(t, 1.0);
    EXPECT_EQ(one.rotation, t.rotation);
    EXPECT_EQ(one.translation, t.translation);
    EXPECT_THROW(interpolate(t, 1.5), InputError);
}

TEST(Interpolate, HalfwayHalvesTheAngle) {
    const RigidTransform t{oracle::rodrigues(Eigen::Vector3d::UnitZ(), 1.2), Eigen::Vector3d(2, 0, 0)};
    const auto h = interpolate(t, 0.5);
    EXPECT_LT(max_abs3(h.rotation, oracle::rodrigues(Eigen::Vector3d::UnitZ(), 0.6)), 1e-12);
    EXPECT_EQ(h.translation, Eigen::Vector3d(1, 0, 0));
    const auto composed = compose(h, h);
    EXPECT_LT(max_abs3(composed.rotation, t.rotation), 1e-12);
}

TEST(RigidTransform, InverseAndCompose) {
    Rng rng(7);
    const RigidTransform t{oracle::random_rotation(rng), Eigen::Vector3d(0.5, -1, 2)};
    const auto id = compose(t, t.inverse());
    EXPECT_LT(max_abs3(id.rotation, Matrix3::Identity()), 1e-12);
    EXPECT_LT(id.translation.norm(), 1e-12);
}

TEST(Reassemble, FullArticulationHitsTargetPose) {
    Rng rng(8);
    PointCloud pose_a;
    std::vector<int> ids;
    std::map<int, std::pair<Matrix3, Eigen::Vector3d>> motions;
    for (int part = 0; part < 3; ++part) {
        motions[part] = {oracle::random_rotation(rng), Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal())};
        for (int k = 0; k < 15; ++k) {
            pose_a.points.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
            ids.push_back(part);
        }
    }
    PointCloud pose_b;
    for (std::size_t k = 0; k < ids.size(); ++k)
        pose_b.points.push_back(motions[ids[k]].first * pose_a.points[k] + motions[ids[k]].second);
    const auto parts_a = split_by_part(pose_a, ids);
    const auto parts_b = split_by_part(pose_b, ids);
    std::map<int, RigidTransform> fits;
    for (const auto& [id, cloud] : parts_a) fits[id] = fit_rigid(cloud, parts_b.at(id)).transform;
    const auto out = reassemble(parts_a, fits, 1.0);
    ASSERT_EQ(out.size(), pose_b.size());
    for (std::size_t k = 0; k < out.size(); ++k) EXPECT_LT((out.points[k] - pose_b.points[k]).norm(), 1e-6);
    const auto rest = reassemble(parts_a, fits, 0.0);
    for (std::size_t k = 0; k < rest.size(); ++k) EXPECT_EQ(rest.points[k], pose_a.points[k]);
    EXPECT_THROW(reassemble(parts_a, {}, 1.0), InputError);
    EXPECT_THROW(split_by_part(pose_a, {0, 1}), InputError);
}
