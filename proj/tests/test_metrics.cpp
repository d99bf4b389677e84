// Copyright (C) 2026 The partlat Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "partlat/metrics.hpp"

using namespace partlat;

namespace {

PointCloud random_cloud(std::size_t n, Rng& rng, double scale = 1.0) {
    PointCloud c;
    for (std::size_t k = 0; k < n; ++k)
        c.points.emplace_back(scale * rng.uniform(-1, 1), scale * rng.uniform(-1, 1), scale * rng.uniform(-1, 1));
    return c;
}

std::set<oracle::Cell> random_cells(Rng& rng, int count, int lo, int hi) {
    std::set<oracle::Cell> cells;
    while (static_cast<int>(cells.size()) < count)
        cells.insert({static_cast<int>(rng.uniform_int(lo, hi)), static_cast<int>(rng.uniform_int(lo, hi)),
                      static_cast<int>(rng.uniform_int(lo, hi))});
    return cells;
}

VoxelGrid grid_from_centers(const std::set<oracle::Cell>& cells, int r) {
    PointCloud c;
    for (const auto& cell : cells) c.points.push_back(oracle::cell_center(cell, r));
    return voxelize(c, {}, r).grid;
}

}  // namespace

TEST(Chamfer, MatchesBruteForce) {
    Rng rng(1);
    for (int trial = 0; trial < 200; ++trial) {
        const auto a = random_cloud(static_cast<std::size_t>(rng.uniform_int(1, 32)), rng);
        const auto b = random_cloud(static_cast<std::size_t>(rng.uniform_int(1, 32)), rng);
        EXPECT_NEAR(chamfer(a, b), oracle::brute_chamfer(a.points, b.points), 1e-12);
    }
}

TEST(Chamfer, Examples) {
    const PointCloud a{{Point3(0, 0, 0)}, std::nullopt}, b{{Point3(1, 0, 0)}, std::nullopt};
    EXPECT_EQ(chamfer(a, a), 0.0);
    EXPECT_EQ(chamfer(a, b), 2.0);
    const PointCloud c{{Point3(2, 0, 0)}, std::nullopt};
    EXPECT_EQ(chamfer(a, c), 8.0);
    EXPECT_EQ(chamfer(a, c, ChamferForm::Euclidean), 4.0);
    EXPECT_THROW(chamfer(a, PointCloud{}), InputError);
}

TEST(KdTree, BitIdenticalToLinearScan) {
    Rng rng(2);
    const auto ref = random_cloud(3000, rng);
    const auto queries = random_cloud(500, rng, 1.3);
    const auto fast = nearest_squared_distances(queries.points, ref.points);
    for (std::size_t q = 0; q < queries.size(); ++q) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& p : ref.points) best = std::min(best, oracle::dist2(queries.points[q], p));
        EXPECT_EQ(fast[q], best);
    }
}

TEST(Emd, ExactMatchesEnumeration) {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const auto n = static_cast<std::size_t>(rng.uniform_int(1, 6));
        const auto a = random_cloud(n, rng), b = random_cloud(n, rng);
        const auto r = emd(a, b);
        EXPECT_EQ(r.mode, EmdMode::Exact);
        EXPECT_NEAR(r.value, oracle::enumerated_emd(a.points, b.points), 1e-12);
    }
}

TEST(Emd, SinkhornBracketsExactOptimum) {
    Rng rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const auto a = random_cloud(20, rng), b = random_cloud(20, rng);
        const double exact = emd(a, b, EmdMode::Exact).value;
        const auto s = emd(a, b, EmdMode::Entropic);
        EXPECT_EQ(s.mode, EmdMode::Entropic);
        EXPECT_GE(s.value, exact - 1e-12);
        EXPECT_LE(s.value - s.duality_gap, exact + 1e-12);
        EXPECT_LT(s.value, exact * 1.05);
    }
}

TEST(Emd, AutoFallsBackForUnequalSizes) {
    Rng rng(5);
    const auto a = random_cloud(10, rng), b = random_cloud(14, rng);
    EXPECT_EQ(emd(a, b).mode, EmdMode::Entropic);
    EXPECT_THROW(emd(a, b, EmdMode::Exact), InputError);
}

TEST(Voxelize, CellIndexingAndDrops) {
    PointCloud c{{Point3(-1, -1, -1), Point3(1, 1, 1), Point3(0, 0, 0), Point3(1.5, 0, 0)}, std::nullopt};
    const auto r = voxelize(c, {}, 4);
    EXPECT_EQ(r.dropped, 1U);
    EXPECT_TRUE(r.grid.get(0, 0, 0));
    EXPECT_TRUE(r.grid.get(3, 3, 3));
    EXPECT_TRUE(r.grid.get(2, 2, 2));
    EXPECT_EQ(r.grid.count(), 3U);
}

TEST(PairwiseIou, MatchesSetOracleAtDefaultResolution) {
    Rng rng(6);
    const int r = kDefaultVoxelResolution;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::set<oracle::Cell>> sets;
        std::vector<VoxelGrid> grids;
        const int parts = static_cast<int>(rng.uniform_int(2, 5));
        for (int p = 0; p < parts; ++p) {
            sets.push_back(random_cells(rng, static_cast<int>(rng.uniform_int(1, 400)), 10, 20));
            grids.push_back(grid_from_centers(sets.back(), r));
            ASSERT_EQ(grids.back().count(), sets.back().size());
        }
        EXPECT_NEAR(pairwise_iou(grids), oracle::mean_pairwise_set_iou(sets), 1e-15);
    }
}

TEST(PairwiseIou, Examples) {
    const int r = kDefaultVoxelResolution;
    const std::set<oracle::Cell> a{{1, 1, 1}, {1, 1, 2}}, b{{1, 1, 2}, {5, 5, 5}};
    EXPECT_DOUBLE_EQ(pairwise_iou({grid_from_centers(a, r), grid_from_centers(b, r)}), 1.0 / 3.0);
    EXPECT_EQ(pairwise_iou({grid_from_centers(a, r), grid_from_centers(a, r)}), 1.0);
    EXPECT_EQ(pairwise_iou({VoxelGrid(r, {}), VoxelGrid(r, {})}), 0.0);
    EXPECT_THROW(pairwise_iou({VoxelGrid(r, {})}), InputError);
    EXPECT_THROW(pairwise_iou({VoxelGrid(r, {}), VoxelGrid(32, {})}), InputError);
}

TEST(Fscore, ConstructedTwoThirdsCase) {
    const PointCloud pred{{Point3(0, 0, 0)}, std::nullopt};
    const PointCloud gt{{Point3(0.001, 0, 0), Point3(0.5, 0, 0)}, std::nullopt};
    const auto f = fscore(pred, gt, kDefaultFscoreThreshold);
    EXPECT_EQ(f.precision, 1.0);
    EXPECT_EQ(f.recall, 0.5);
    EXPECT_EQ(f.fscore, 2.0 / 3.0);
}

TEST(Fscore, ThresholdIsInclusiveAndPositive) {
    const PointCloud a{{Point3(0, 0, 0)}, std::nullopt}, b{{Point3(0.25, 0, 0)}, std::nullopt};
    EXPECT_EQ(fscore(a, b, 0.25).fscore, 1.0);
    EXPECT_EQ(fscore(a, b, 0.2).fscore, 0.0);
    EXPECT_THROW(fscore(a, b, 0.0), InputError);
}

TEST(NormalizedInnerProduct, Basics) {
    EXPECT_DOUBLE_EQ(normalized_inner_product(Eigen::Vector2d(2, 0), Eigen::Vector2d(5, 0)), 1.0);
    EXPECT_THROW(normalized_inner_product(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0)), NumericError);
}
