// Copyright (C) 2026 The partlat Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "partlat/latent_math.hpp"
#include "partlat/parallel.hpp"
#include "partlat/rng.hpp"
#include "test_util.hpp"

using namespace partlat;
using partlat::testing::max_abs;
using partlat::testing::random_matrix;

namespace {

Matrix rows(std::initializer_list<std::initializer_list<double>> r) {
    Matrix m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
    Eigen::Index i = 0;
    for (const auto& row : r) {
        Eigen::Index j = 0;
        for (double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

// Loop-by-loop softmax attention, independent of the Eigen expression path.
Matrix naive_attention(const Matrix& x, const Matrix& y, const AttentionParams& p) {
    const Matrix q = x * p.w_q, k = y * p.w_k, v = y * p.w_v;
    const double d = static_cast<double>(x.cols());
    Matrix out = Matrix::Zero(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        std::vector<double> s(static_cast<std::size_t>(y.rows()));
        double mx = -1e300;
        for (Eigen::Index c = 0; c < y.rows(); ++c) {
            double dot = 0;
            for (Eigen::Index a = 0; a < x.cols(); ++a) dot += q(r, a) * k(c, a);
            s[static_cast<std::size_t>(c)] = dot / std::sqrt(d);
            mx = std::max(mx, s[static_cast<std::size_t>(c)]);
        }
        double z = 0;
        for (auto& e : s) z += (e = std::exp(e - mx));
        for (Eigen::Index c = 0; c < y.rows(); ++c) out.row(r) += s[static_cast<std::size_t>(c)] / z * v.row(c);
    }
    return out;
}

}  // namespace

TEST(Attention, SingleContextTokenReturnsIt) {
    const auto out = attention(rows({{1, 0}}), rows({{0, 2}}), AttentionParams::identity(2));
    EXPECT_DOUBLE_EQ(out(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(out(0, 1), 2.0);
}

TEST(Attention, TwoRowSoftmaxHandOracle) {
    const auto out = attention(rows({{1, 0}}), rows({{1, 0}, {-1, 0}}), AttentionParams::identity(2));
    const double a = std::exp(1 / std::sqrt(2.0)), b = std::exp(-1 / std::sqrt(2.0));
    const double s = a / (a + b);
    EXPECT_NEAR(out(0, 0), s * 1 + (1 - s) * -1, 1e-15);
    EXPECT_NEAR(out(0, 1), 0.0, 1e-15);
}

TEST(Attention, OneDimensionalSelfAttentionOnSingleTokenIsIdentity) {
    const Matrix x = rows({{3.5}});
    EXPECT_EQ(attention(x, x, AttentionParams::identity(1)), x);
}

TEST(Attention, MatchesNaiveLoopsWithRandomParams) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto p = AttentionParams::random(5, seed);
        const Matrix x = random_matrix(4, 5, seed * 3), y = random_matrix(7, 5, seed * 5);
        EXPECT_LT(max_abs(attention(x, y, p), naive_attention(x, y, p)), 1e-12);
    }
}

TEST(Attention, WeightsAreRowStochastic) {
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const auto w = attention_weights(random_matrix(6, 4, seed), random_matrix(9, 4, seed + 100),
                                         AttentionParams::random(4, seed + 7, 1.0));
        for (Eigen::Index r = 0; r < w.rows(); ++r) EXPECT_NEAR(w.row(r).sum(), 1.0, 1e-9);
        EXPECT_GE(w.minCoeff(), 0.0);
    }
}

TEST(Attention, LargeMagnitudesStayFinite) {
    const Matrix x = random_matrix(3, 4, 11, 1e3), y = random_matrix(5, 4, 12, 1e3);
    EXPECT_TRUE(attention(x, y, AttentionParams::identity(4)).allFinite());
}

TEST(Attention, MaskedRowsGetNoWeight) {
    const Matrix y = random_matrix(5, 3, 4);
    const Matrix x = random_matrix(2, 3, 5);
    const RowMask mask{false, true, false, true, true};
    const auto w = attention_weights(x, y, AttentionParams::identity(3), mask);
    EXPECT_EQ(w(0, 1), 0.0);
    EXPECT_EQ(w(1, 4), 0.0);
    Matrix prefix(2, 3);
    prefix.row(0) = y.row(0);
    prefix.row(1) = y.row(2);
    EXPECT_LT(max_abs(attention(x, y, AttentionParams::identity(3), mask),
                      attention(x, prefix, AttentionParams::identity(3))),
              1e-14);
}

TEST(Attention, Errors) {
    const auto p = AttentionParams::identity(2);
    EXPECT_THROW(attention(rows({{1, 0}}), rows({{1, 0, 0}}), p), DimensionError);
    EXPECT_THROW(attention(rows({{1, 0}}), rows({{1, 0}}), AttentionParams::identity(3)), DimensionError);
    Matrix bad = rows({{1, 0}});
    bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(attention(bad, rows({{1, 0}}), p), NumericError);
    EXPECT_THROW(attention(rows({{1, 0}}), rows({{1, 0}}), p, RowMask{true}), DimensionError);
    EXPECT_THROW(attention(rows({{1, 0}}), rows({{1, 0}}), p, RowMask{false, false}), DimensionError);
}

TEST(ResidualUpdate, ZeroCoefficientIsBitExact) {
    const Matrix t = random_matrix(4, 3, 1), s = random_matrix(6, 3, 2);
    const Matrix out = residual_update(t, s, 0.0, AttentionParams::random(3, 9));
    EXPECT_EQ(out, t);
}

TEST(ResidualUpdate, UnitCoefficientSingleToken) {
    const Matrix out = residual_update(rows({{1, 0}}), rows({{0, 2}}), 1.0, AttentionParams::identity(2));
    EXPECT_EQ(out, rows({{1, 2}}));
}

TEST(ResidualUpdate, ZeroContextValues) {
    const Matrix out = residual_update(rows({{2, 2}}), rows({{0, 0}}), 0.5, AttentionParams::identity(2));
    EXPECT_EQ(out, rows({{2, 2}}));
}

TEST(ResidualUpdate, LinearInCoefficient) {
    const Matrix t = random_matrix(3, 4, 21), s = random_matrix(5, 4, 22);
    const auto p = AttentionParams::random(4, 23);
    const Matrix lhs = residual_update(t, s, 0.3, p) + residual_update(t, s, 1.1, p) - 2 * t;
    const Matrix rhs = residual_update(t, s, 1.4, p) - t;
    EXPECT_LT(max_abs(lhs, rhs), 1e-9);
}

TEST(PoolPart, Examples) {
    EXPECT_EQ(pool_part(rows({{1, 1}}), rows({{3, 3}}), Matrix::Identity(2, 2)), Vector(Eigen::Vector2d(2, 2)));
    EXPECT_EQ(pool_part(rows({{0, 0}, {0, 0}}), rows({{0, 0}}), random_matrix(2, 2, 3)), Vector(Eigen::Vector2d(0, 0)));
    EXPECT_EQ(pool_part(rows({{1, 0}, {3, 0}}), rows({{2, 0}}), Matrix::Identity(2, 2)), Vector(Eigen::Vector2d(2, 0)));
}

TEST(PoolPart, WidthMismatch) {
    EXPECT_THROW(pool_part(rows({{1, 1}}), rows({{1, 1, 1}}), Matrix::Identity(2, 2)), DimensionError);
}

TEST(Rng, DeterministicAndSubstreamsIndependent) {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
    std::set<std::uint64_t> seeds;
    for (std::uint64_t i = 0; i < 100; ++i) seeds.insert(substream_seed(7, "geo", i));
    seeds.insert(substream_seed(7, "app", 0));
    EXPECT_EQ(seeds.size(), 101U);
    // Adding streams never shifts existing ones.
    EXPECT_EQ(substream(7, "geo", 3).next_u64(), substream(7, "geo", 3).next_u64());
}

TEST(Rng, NormalMoments) {
    Rng r(5);
    double s = 0, s2 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal();
        s += x;
        s2 += x * x;
    }
    EXPECT_NEAR(s / n, 0.0, 0.01);
    EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Rng, UniformIntRange) {
    Rng r(9);
    for (int i = 0; i < 10000; ++i) {
        const auto v = r.uniform_int(1, 6);
        EXPECT_GE(v, 1);
        EXPECT_LE(v, 6);
    }
}

TEST(Parallel, CoversEveryIndexOnceAndRethrows) {
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) EXPECT_EQ(h, 1);
    EXPECT_THROW(parallel_for(10, [](std::size_t i) {
                     if (i == 7) throw InputError("boom");
                 }),
                 InputError);
}
