// Copyright (C) 2026 The partlat Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "partlat/binary_io.hpp"
#include "partlat/latent_math.hpp"

namespace partlat {

struct LatentDims {
    Eigen::Index d = 32;
    Eigen::Index geo_tokens = 64;   // T_3D
    Eigen::Index app_tokens = 256;  // T_2D
};

/// One part's duplex latent: geometry and appearance token streams bound to a
/// persistent slot identity.
struct PartLatent {
    int part_id = 0;
    TokenSeq geo;
    TokenSeq app;
    Vector identity;
    std::optional<std::string> label;

    Eigen::Index width() const { return geo.cols(); }
};

struct ObjectLatents {
    std::vector<PartLatent> parts;
    LatentDims dims;

    std::size_t size() const { return parts.size(); }

    // Throws unless every part matches dims and ids are a permutation of 0..N-1.
    void validate() const {
        if (parts.empty()) throw InputError("object has no parts");
        std::vector<bool> seen(parts.size(), false);
        for (const auto& part : parts) {
            if (part.geo.cols() != dims.d || part.app.cols() != dims.d || part.identity.size() != dims.d)
                throw DimensionError("part " + std::to_string(part.part_id) + " width differs from object width");
            if (part.geo.rows() != dims.geo_tokens || part.app.rows() != dims.app_tokens)
                throw DimensionError("part " + std::to_string(part.part_id) + " token count differs from object");
            if (part.part_id < 0 || part.part_id >= static_cast<int>(parts.size()) || seen[part.part_id])
                throw InputError("part ids must be a permutation of 0..N-1");
            seen[part.part_id] = true;
            require_finite(part.geo, "part geometry");
            require_finite(part.app, "part appearance");
            require_finite(part.identity, "part identity");
        }
    }
};

/// Slot-indexed identity embeddings, initialized once from a seed and then frozen.
class IdentityTable {
public:
    IdentityTable() = default;
    explicit IdentityTable(Matrix rows) : rows_(std::move(rows)) { require_finite(rows_, "identity table"); }

    // Entries uniform in [-scale, scale]; scale <= 0 selects 1/sqrt(d).
    static IdentityTable random(Eigen::Index slots, Eigen::Index d, std::uint64_t seed, double scale = 0.0) {
        if (scale <= 0.0) scale = 1.0 / std::sqrt(static_cast<double>(d));
        Rng rng = substream(seed, "identity-table");
        return IdentityTable(random_uniform_matrix(slots, d, rng, scale));
    }

    static IdentityTable zeros(Eigen::Index slots, Eigen::Index d) { return IdentityTable(Matrix::Zero(slots, d)); }

    Eigen::Index slots() const { return rows_.rows(); }
    Eigen::Index width() const { return rows_.cols(); }

    Vector row(int slot) const {
        if (slot < 0 || slot >= rows_.rows())
            throw InputError("part id " + std::to_string(slot) + " outside identity table of " +
                             std::to_string(rows_.rows()) + " slots");
        return rows_.row(slot).transpose();
    }

    const Matrix& matrix() const { return rows_; }

private:
    Matrix rows_;
};

inline PartLatent make_part_latent(TokenSeq geo, TokenSeq app, int part_id, const IdentityTable& table,
                                   std::optional<std::string> label = std::nullopt) {
    if (geo.cols() != app.cols())
        throw DimensionError("geometry width " + std::to_string(geo.cols()) + " differs from appearance width " +
                             std::to_string(app.cols()));
    if (geo.rows() < 1 || app.rows() < 1) throw DimensionError("part streams need at least one token");
    if (table.width() != geo.cols()) throw DimensionError("identity table width differs from token width");
    if (part_id < 0) throw InputError("negative part id");
    require_finite(geo, "part geometry");
    require_finite(app, "part appearance");
    PartLatent part;
    part.part_id = part_id;
    part.geo = std::move(geo);
    part.app = std::move(app);
    part.identity = table.row(part_id);
    part.label = std::move(label);
    return part;
}

// Adds e_i to every token of both streams.
inline PartLatent apply_identity(const PartLatent& part) {
    PartLatent out = part;
    out.geo.rowwise() += part.identity.transpose();
    out.app.rowwise() += part.identity.transpose();
    return out;
}

inline PartLatent remove_identity(const PartLatent& part) {
    PartLatent out = part;
    out.geo.rowwise() -= part.identity.transpose();
    out.app.rowwise() -= part.identity.transpose();
    return out;
}

inline bool is_permutation_of_range(const std::vector<int>& perm) {
    std::vector<bool> seen(perm.size(), false);
    for (int p : perm) {
        if (p < 0 || p >= static_cast<int>(perm.size()) || seen[p]) return false;
        seen[p] = true;
    }
    return true;
}

/// Reorders the part list: result.parts[k] = obj.parts[perm[k]]. Ids and
/// identities travel with their part.
inline ObjectLatents permute_parts(const ObjectLatents& obj, const std::vector<int>& perm) {
    if (perm.size() != obj.parts.size() || !is_permutation_of_range(perm))
        throw InputError("invalid part permutation");
    ObjectLatents out;
    out.dims = obj.dims;
    out.parts.reserve(perm.size());
    for (int src : perm) out.parts.push_back(obj.parts[src]);
    return out;
}

inline std::vector<int> inverse_permutation(const std::vector<int>& perm) {
    if (!is_permutation_of_range(perm)) throw InputError("invalid permutation");
    std::vector<int> inv(perm.size());
    for (std::size_t k = 0; k < perm.size(); ++k) inv[perm[k]] = static_cast<int>(k);
    return inv;
}

// ---------------------------------------------------------------------------
// PLTF: little-endian part-latent tensor file.
//   "PLTF" u32 version=1 u32 N u32 d u32 T_3D u32 T_2D
//   per part: u32 part_id u32 label_len label f32 geo f32 app f32 identity
// Matrices are stored row-major as f32.

inline constexpr std::uint32_t kPltfVersion = 1;

inline std::string encode_pltf(const ObjectLatents& obj) {
    obj.validate();
    ByteWriter w;
    w.raw("PLTF");
    w.u32(kPltfVersion);
    w.u32(static_cast<std::uint32_t>(obj.parts.size()));
    w.u32(static_cast<std::uint32_t>(obj.dims.d));
    w.u32(static_cast<std::uint32_t>(obj.dims.geo_tokens));
    w.u32(static_cast<std::uint32_t>(obj.dims.app_tokens));
    auto put = [&](const Matrix& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) w.f32(static_cast<float>(m(r, c)));
    };
    for (const auto& part : obj.parts) {
        w.u32(static_cast<std::uint32_t>(part.part_id));
        const std::string label = part.label.value_or("");
        w.u32(static_cast<std::uint32_t>(label.size()));
        w.raw(label);
        put(part.geo);
        put(part.app);
        for (Eigen::Index c = 0; c < part.identity.size(); ++c) w.f32(static_cast<float>(part.identity(c)));
    }
    return w.bytes();
}

inline ObjectLatents decode_pltf(std::string_view bytes) {
    ByteReader r(bytes, "PLTF");
    if (r.raw(4) != "PLTF") throw InputError("PLTF: bad magic");
    if (const auto version = r.u32(); version != kPltfVersion)
        throw InputError("PLTF: unsupported version " + std::to_string(version));
    const auto n = r.u32();
    ObjectLatents obj;
    obj.dims.d = r.u32();
    obj.dims.geo_tokens = r.u32();
    obj.dims.app_tokens = r.u32();
    if (n == 0 || obj.dims.d == 0 || obj.dims.geo_tokens == 0 || obj.dims.app_tokens == 0)
        throw InputError("PLTF: zero dimension in header");
    const auto per_part_floats =
        static_cast<std::uint64_t>(obj.dims.geo_tokens + obj.dims.app_tokens + 1) * static_cast<std::uint64_t>(obj.dims.d);
    if (per_part_floats * 4 * n > r.remaining()) throw InputError("PLTF: header promises more data than present");
    auto get = [&](Eigen::Index rows, Eigen::Index cols) {
        Matrix m(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = static_cast<double>(r.f32());
        return m;
    };
    for (std::uint32_t k = 0; k < n; ++k) {
        PartLatent part;
        part.part_id = static_cast<int>(r.u32());
        const auto label_len = r.u32();
        std::string label = r.raw(label_len);
        if (!label.empty()) part.label = std::move(label);
        part.geo = get(obj.dims.geo_tokens, obj.dims.d);
        part.app = get(obj.dims.app_tokens, obj.dims.d);
        part.identity = get(obj.dims.d, 1);
        obj.parts.push_back(std::move(part));
    }
    if (!r.at_end()) throw InputError("PLTF: trailing bytes");
    obj.validate();
    return obj;
}

inline void write_pltf(const std::filesystem::path& path, const ObjectLatents& obj) {
    write_file_atomic(path, encode_pltf(obj));
}

inline ObjectLatents read_pltf(const std::filesystem::path& path) { return decode_pltf(read_file_bytes(path)); }

}  // namespace partlat
