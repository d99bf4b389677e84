// Copyright (C) 2026 The partlat Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <string>

#include "partlat/rsl.hpp"
#include "test_util.hpp"

using namespace partlat;

namespace {

RelationalTriplet triplet(int i, int j, PredicateId p) { return {i, j, Predicate(p), "", Provenance::Metadata}; }

}  // namespace

TEST(HashEmbed, DeterministicUnitNorm) {
    EXPECT_EQ(hash_embed("wooden seat", 64, 3), hash_embed("wooden seat", 64, 3));
    Rng rng(1);
    for (int k = 0; k < 100; ++k) {
        std::string s;
        const auto len = rng.uniform_int(1, 20);
        for (int c = 0; c < len; ++c) s += static_cast<char>('a' + rng.uniform_int(0, 25));
        if (rng.uniform() < 0.3) s += " extra words";
        EXPECT_NEAR(hash_embed(s, 32, 11).norm(), 1.0, 1e-9);
    }
}

TEST(HashEmbed, DistinctWordsDoNotCollide) {
    EXPECT_LT(cosine_similarity(hash_embed("handle", 64, 7), hash_embed("blade", 64, 7)), 0.9);
    EXPECT_NE(hash_embed("handle", 64, 7), hash_embed("handle", 64, 8));
}

TEST(HashEmbed, RejectsEmptyText) { EXPECT_THROW(hash_embed("", 8, 0), InputError); }

TEST(Embedder, DefaultProjection) {
    EXPECT_EQ(Embedder::hash(16, 16, 1).projection(), Matrix::Identity(16, 16));
    const auto e = Embedder::hash(24, 8, 1);
    EXPECT_EQ(e.projection().rows(), 8);
    EXPECT_EQ(e.projection().cols(), 24);
    EXPECT_LE(e.projection().cwiseAbs().maxCoeff(), 1.0 / std::sqrt(24.0));
}

TEST(Embedder, FileModeLookupAndMissingPhrase) {
    std::map<std::string, Vector> table;
    table["seat"] = Eigen::Vector3d(1, 0, 0);
    table["legs"] = Eigen::Vector3d(0, 1, 0);
    const auto e = Embedder::from_table(table, 3, 3, 0);
    EXPECT_EQ(e.embed("seat"), table["seat"]);
    EXPECT_EQ(e.embed("Seat"), table["seat"]);
    EXPECT_THROW(e.embed("wing"), InputError);
}

TEST(Embf, RoundTrip) {
    std::map<std::string, Vector> table;
    table["a"] = Eigen::Vector2d(0.5, -1.25);
    table["bb"] = Eigen::Vector2d(3, 4);
    const auto [back, d] = decode_embf(encode_embf(table, 2));
    EXPECT_EQ(d, 2);
    EXPECT_EQ(back, table);
    EXPECT_THROW(decode_embf("XXXX"), InputError);
}

TEST(EncodeGlobal, EmptyAndDedup) {
    const auto emb = Embedder::hash(8, 8, 2);
    std::map<int, std::string> names{{0, "seat"}, {1, "leg"}};
    EXPECT_TRUE(encode_global({}, names, emb).empty());
    const auto tokens = encode_global({triplet(0, 1, PredicateId::Above), triplet(0, 1, PredicateId::Above)}, names, emb);
    EXPECT_EQ(tokens.size(), 1U);
}

TEST(EncodeGlobal, MeanOfThreeEmbeddings) {
    const auto emb = Embedder::hash(16, 16, 5);
    std::map<int, std::string> names{{0, "seat"}, {1, "legs"}};
    const auto tokens = encode_global({triplet(0, 1, PredicateId::Above)}, names, emb);
    ASSERT_EQ(tokens.size(), 1U);
    const Vector expect = (hash_embed("seat", 16, 5) + hash_embed("above", 16, 5) + hash_embed("legs", 16, 5)) / 3.0;
    EXPECT_LT((tokens[0].vector - expect).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(EncodeGlobal, OrderInvariantAndUnknownPart) {
    const auto emb = Embedder::hash(8, 8, 2);
    std::map<int, std::string> names{{0, "seat"}, {1, "leg"}, {2, "back"}};
    std::vector<RelationalTriplet> ts{triplet(0, 1, PredicateId::Above), triplet(2, 0, PredicateId::Behind),
                                      triplet(1, 0, PredicateId::Support)};
    const auto a = encode_global(ts, names, emb);
    std::reverse(ts.begin(), ts.end());
    const auto b = encode_global(ts, names, emb);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_EQ(a[k].key, b[k].key);
        EXPECT_EQ(a[k].vector, b[k].vector);
    }
    EXPECT_THROW(encode_global({triplet(0, 5, PredicateId::Above)}, names, emb), InputError);
}

TEST(EncodeLocal, DefaultSixteenNoPadding) {
    const auto emb = Embedder::hash(8, 8, 1);
    std::vector<std::string> phrases;
    for (int k = 0; k < 16; ++k) phrases.push_back("phrase " + std::to_string(k));
    const auto local = encode_local(phrases, 16, emb);
    EXPECT_EQ(local.vectors.rows(), 16);
    EXPECT_EQ(std::count(local.padded.begin(), local.padded.end(), true), 0);
}

TEST(EncodeLocal, PaddingAndTruncation) {
    const auto emb = Embedder::hash(8, 8, 1);
    const auto padded = encode_local({"red seat", "tall back", "thin legs"}, 16, emb);
    EXPECT_EQ(std::count(padded.padded.begin(), padded.padded.end(), true), 13);
    EXPECT_TRUE(padded.vectors.bottomRows(13).isZero(0));
    EXPECT_EQ(padded.vectors.row(0).transpose(), emb.project(emb.embed("red seat")));

    std::vector<std::string> many;
    for (int k = 0; k < 20; ++k) many.push_back("p" + std::to_string(k));
    const auto cut = encode_local(many, 16, emb);
    EXPECT_EQ(cut.phrases.front(), "p0");
    EXPECT_EQ(cut.phrases.back(), "p15");
    EXPECT_THROW(encode_local(many, 0, emb), InputError);
}

TEST(EncodeLocal, FileAndHashModesShareShape) {
    std::map<std::string, Vector> table;
    table["red seat"] = Vector::Ones(8);
    const auto file = encode_local({"red seat"}, 4, Embedder::from_table(table, 8, 6, 0));
    const auto hash = encode_local({"red seat"}, 4, Embedder::hash(8, 6, 0));
    EXPECT_EQ(file.vectors.rows(), hash.vectors.rows());
    EXPECT_EQ(file.vectors.cols(), hash.vectors.cols());
}
