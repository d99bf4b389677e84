// Copyright (C) 2026 The partlat Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "partlat/binary_io.hpp"
#include "partlat/latent_math.hpp"
#include "partlat/triplet.hpp"

namespace partlat {

// Lowercase words of `text`; hyphens, underscores and punctuation split words.
inline std::vector<std::string> text_words(std::string_view text) {
    std::vector<std::string> words;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c) || c >= 0x80 || c == '\'') {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            words.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

namespace detail {

inline Vector hashed_gaussian(std::string_view key, Eigen::Index d, std::uint64_t seed) {
    Rng rng = substream(seed, key);
    Vector v(d);
    for (Eigen::Index k = 0; k < d; ++k) v(k) = rng.normal();
    return v;
}

}  // namespace detail

/// Deterministic stand-in for a frozen text encoder: a unit-norm sum of
/// per-word Gaussian vectors plus half-weight word-bigram vectors. Shared
/// words give correlated embeddings; word order changes the bigram part.
inline Vector hash_embed(std::string_view text, Eigen::Index d_text, std::uint64_t seed) {
    if (text.empty()) throw InputError("hash_embed: empty text");
    if (d_text < 1) throw DimensionError("hash_embed: d_text must be positive");
    const auto words = text_words(text);
    Vector v = Vector::Zero(d_text);
    if (words.empty()) {
        v = detail::hashed_gaussian(std::string("raw:") + std::string(text), d_text, seed);
    } else {
        for (const auto& w : words) v += detail::hashed_gaussian("w:" + w, d_text, seed);
        for (std::size_t k = 0; k + 1 < words.size(); ++k)
            v += 0.5 * detail::hashed_gaussian("b:" + words[k] + " " + words[k + 1], d_text, seed);
    }
    const double norm = v.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) throw NumericError("hash_embed: degenerate vector");
    return v / norm;
}

inline double cosine_similarity(const Vector& a, const Vector& b) {
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return a.dot(b) / (na * nb);
}

// EMBF: "EMBF" u32 d_text u32 count, then per entry u32 key_len, key, f32 x d_text.
inline std::string encode_embf(const std::map<std::string, Vector>& table, Eigen::Index d_text) {
    ByteWriter w;
    w.raw("EMBF");
    w.u32(static_cast<std::uint32_t>(d_text));
    w.u32(static_cast<std::uint32_t>(table.size()));
    for (const auto& [key, vec] : table) {
        if (vec.size() != d_text) throw DimensionError("EMBF entry '" + key + "' has wrong width");
        w.u32(static_cast<std::uint32_t>(key.size()));
        w.raw(key);
        for (Eigen::Index k = 0; k < d_text; ++k) w.f32(static_cast<float>(vec(k)));
    }
    return w.bytes();
}

inline std::pair<std::map<std::string, Vector>, Eigen::Index> decode_embf(std::string_view bytes) {
    ByteReader r(bytes, "EMBF");
    if (r.raw(4) != "EMBF") throw InputError("EMBF: bad magic");
    const Eigen::Index d_text = r.u32();
    const auto count = r.u32();
    if (d_text < 1) throw InputError("EMBF: zero width");
    std::map<std::string, Vector> table;
    for (std::uint32_t e = 0; e < count; ++e) {
        const auto len = r.u32();
        std::string key = r.raw(len);
        Vector v(d_text);
        for (Eigen::Index k = 0; k < d_text; ++k) v(k) = r.f32();
        if (!v.allFinite()) throw InputError("EMBF: non-finite vector for '" + key + "'");
        table[std::move(key)] = std::move(v);
    }
    if (!r.at_end()) throw InputError("EMBF: trailing bytes");
    return {std::move(table), d_text};
}

/// Text embedding source followed by a linear projection phi into the latent width.
class Embedder {
public:
    enum class Mode { Hash, File };

    static Embedder hash(Eigen::Index d_text, Eigen::Index d, std::uint64_t seed) {
        Embedder e;
        e.mode_ = Mode::Hash;
        e.d_text_ = d_text;
        e.seed_ = seed;
        e.projection_ = default_projection(d_text, d, seed);
        return e;
    }

    static Embedder from_table(std::map<std::string, Vector> table, Eigen::Index d_text, Eigen::Index d,
                               std::uint64_t seed) {
        Embedder e;
        e.mode_ = Mode::File;
        e.d_text_ = d_text;
        e.seed_ = seed;
        e.table_ = std::move(table);
        e.projection_ = default_projection(d_text, d, seed);
        return e;
    }

    static Embedder from_file(const std::filesystem::path& path, Eigen::Index d, std::uint64_t seed) {
        auto [table, d_text] = decode_embf(read_file_bytes(path));
        return from_table(std::move(table), d_text, d, seed);
    }

    // Identity when the widths agree, otherwise seeded uniform entries in
    // [-1/sqrt(d_text), 1/sqrt(d_text)].
    static Matrix default_projection(Eigen::Index d_text, Eigen::Index d, std::uint64_t seed) {
        if (d_text == d) return Matrix::Identity(d, d);
        Rng rng = substream(seed, "text-projection");
        return random_uniform_matrix(d, d_text, rng, 1.0 / std::sqrt(static_cast<double>(d_text)));
    }

    void set_projection(Matrix phi) {
        if (phi.cols() != d_text_) throw DimensionError("projection must have d_text columns");
        require_finite(phi, "text projection");
        projection_ = std::move(phi);
    }

    Mode mode() const { return mode_; }
    Eigen::Index text_width() const { return d_text_; }
    Eigen::Index width() const { return projection_.rows(); }
    const Matrix& projection() const { return projection_; }

    std::optional<Vector> try_embed(std::string_view text) const {
        if (text.empty()) return std::nullopt;
        if (mode_ == Mode::Hash) return hash_embed(text, d_text_, seed_);
        if (auto it = table_.find(std::string(text)); it != table_.end()) return it->second;
        std::string lower(text);
        std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
        if (auto it = table_.find(lower); it != table_.end()) return it->second;
        return std::nullopt;
    }

    // Raw text-space embedding.
    Vector embed(std::string_view text) const {
        if (text.empty()) throw InputError("cannot embed empty text");
        if (auto v = try_embed(text)) return *v;
        throw InputError("phrase '" + std::string(text) + "' missing from embedding file");
    }

    Vector project(const Vector& text_vec) const { return projection_ * text_vec; }

private:
    Mode mode_ = Mode::Hash;
    Eigen::Index d_text_ = 0;
    std::uint64_t seed_ = 0;
    std::map<std::string, Vector> table_;
    Matrix projection_;
};

struct GlobalToken {
    TripletKey key;
    Vector vector;
};

// Sorted by key, one token per distinct triplet.
using GlobalTokens = std::vector<GlobalToken>;

struct LocalTokens {
    Matrix vectors;                    // K_m x d
    std::vector<std::string> phrases;  // K_m entries, "" on padded rows
    RowMask padded;                    // K_m entries

    Eigen::Index count() const { return vectors.rows(); }
    bool all_padded() const { return mask_covers_all(padded, vectors.rows()); }
};

struct SemanticLatents {
    GlobalTokens global;
    LocalTokens local;
};

inline Matrix global_matrix(const GlobalTokens& tokens, Eigen::Index d) {
    Matrix m(static_cast<Eigen::Index>(tokens.size()), d);
    for (std::size_t k = 0; k < tokens.size(); ++k) m.row(static_cast<Eigen::Index>(k)) = tokens[k].vector.transpose();
    return m;
}

inline GlobalTokens with_global_matrix(GlobalTokens tokens, const Matrix& m) {
    if (m.rows() != static_cast<Eigen::Index>(tokens.size())) throw DimensionError("global token count mismatch");
    for (std::size_t k = 0; k < tokens.size(); ++k) tokens[k].vector = m.row(static_cast<Eigen::Index>(k)).transpose();
    return tokens;
}

/// One token per distinct triplet: phi * mean(E(name_i), E(predicate), E(name_j)).
inline GlobalTokens encode_global(const std::vector<RelationalTriplet>& triplets,
                                  const std::map<int, std::string>& part_names, const Embedder& emb) {
    std::map<TripletKey, Vector> tokens;
    for (const auto& t : triplets) {
        const auto key = t.key();
        if (tokens.contains(key)) continue;
        const auto name_i = part_names.find(t.i);
        const auto name_j = part_names.find(t.j);
        if (name_i == part_names.end()) throw InputError("triplet references unknown part " + std::to_string(t.i));
        if (name_j == part_names.end()) throw InputError("triplet references unknown part " + std::to_string(t.j));
        const Vector mean =
            (emb.embed(name_i->second) + emb.embed(t.predicate.name()) + emb.embed(name_j->second)) / 3.0;
        tokens.emplace(key, emb.project(mean));
    }
    GlobalTokens out;
    out.reserve(tokens.size());
    for (auto& [key, vec] : tokens) out.push_back({key, std::move(vec)});
    return out;
}

/// K_m local tokens: the first K_m phrases in document order, zero rows
/// (flagged padded) when fewer are given.
inline LocalTokens encode_local(const std::vector<std::string>& phrases, int k_m, const Embedder& emb) {
    if (k_m < 1) throw InputError("K_m must be at least 1");
    LocalTokens out;
    out.vectors = Matrix::Zero(k_m, emb.width());
    out.phrases.assign(static_cast<std::size_t>(k_m), "");
    out.padded.assign(static_cast<std::size_t>(k_m), true);
    const auto kept = std::min<std::size_t>(phrases.size(), static_cast<std::size_t>(k_m));
    for (std::size_t m = 0; m < kept; ++m) {
        out.vectors.row(static_cast<Eigen::Index>(m)) = emb.project(emb.embed(phrases[m])).transpose();
        out.phrases[m] = phrases[m];
        out.padded[m] = false;
    }
    return out;
}

}  // namespace partlat
