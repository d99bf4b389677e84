// Copyright (C) 2026 The partlat Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "partlat/dpl.hpp"
#include "partlat/latent_math.hpp"
#include "partlat/parallel.hpp"
#include "partlat/rsl.hpp"

namespace partlat {

/// Noisy co-denoising state at timestep t. S^glb is never noised.
struct DenoiseState {
    ObjectLatents parts;
    LocalTokens local;
    GlobalTokens global;
    int t = 0;
};

/// Fusion coefficients and the attention parameters of the nine sync sites.
struct SyncCoefficients {
    double alpha_3d = 1.0;
    double alpha_2d = 1.0;
    double lambda_3d = 1.0;
    double lambda_2d = 1.0;
    double beta_3d = 1.0;
    double beta_2d = 1.0;
    double eta = 1.0;

    struct Sites {
        AttentionParams geo_from_app;
        AttentionParams app_from_geo;
        AttentionParams geo_from_local;
        AttentionParams app_from_local;
        AttentionParams geo_message;
        AttentionParams app_message;
        AttentionParams geo_from_global;
        AttentionParams app_from_global;
        AttentionParams planner;
    } sites;

    Matrix pool_proj;

    Eigen::Index width() const { return pool_proj.rows(); }

    static SyncCoefficients identity(Eigen::Index d) {
        SyncCoefficients c;
        const auto id = AttentionParams::identity(d);
        c.sites = {id, id, id, id, id, id, id, id, id};
        c.pool_proj = Matrix::Identity(d, d);
        return c;
    }

    // scale <= 0 selects 1/sqrt(d) for the attention entries.
    static SyncCoefficients random(Eigen::Index d, std::uint64_t seed, double scale = 0.0) {
        SyncCoefficients c;
        auto site = [&](const char* name) { return AttentionParams::random(d, substream_seed(seed, name), scale); };
        c.sites = {site("geo_from_app"),   site("app_from_geo"), site("geo_from_local"),
                   site("app_from_local"), site("geo_message"),  site("app_message"),
                   site("geo_from_global"), site("app_from_global"), site("planner")};
        c.pool_proj = Matrix::Identity(d, d);
        return c;
    }

    void set_all(double value) { alpha_3d = alpha_2d = lambda_3d = lambda_2d = beta_3d = beta_2d = eta = value; }
};

namespace detail {

inline void check_state_width(const DenoiseState& s, const SyncCoefficients& c) {
    const auto d = s.parts.dims.d;
    if (c.width() != d) throw DimensionError("sync parameters width differs from latent width");
    if (s.local.vectors.rows() > 0) require_width(s.local.vectors, d, "local tokens");
    for (const auto& g : s.global)
        if (g.vector.size() != d) throw DimensionError("global token width differs from latent width");
}

}  // namespace detail

/// Per part, in order: geo <- geo + a3*Attn(geo, app); app <- app + a2*Attn(app, geo);
/// geo <- geo + l3*Attn(geo, S^loc); app <- app + l2*Attn(app, S^loc). Each update
/// reads the previous one's result. The identity embedding is bound at block
/// entry (attention sees x + e_i) and the block returns x + accumulated residual.
/// Padded local rows are masked; an all-padded S^loc skips the lambda updates.
inline DenoiseState intra_part_sync(const DenoiseState& state, const SyncCoefficients& c) {
    detail::check_state_width(state, c);
    DenoiseState out = state;
    const bool use_local = state.local.vectors.rows() > 0 && !state.local.all_padded();
    parallel_for(state.parts.parts.size(), [&](std::size_t k) {
        const PartLatent& part = state.parts.parts[k];
        const TokenSeq geo0 = part.geo.rowwise() + part.identity.transpose();
        const TokenSeq app0 = part.app.rowwise() + part.identity.transpose();
        TokenSeq dg = TokenSeq::Zero(geo0.rows(), geo0.cols());
        TokenSeq da = TokenSeq::Zero(app0.rows(), app0.cols());
        auto step = [](TokenSeq& delta, const TokenSeq& base, const TokenSeq& ctx, double coeff,
                       const AttentionParams& p, const RowMask& mask) {
            if (coeff == 0.0) return;
            delta += coeff * attention(base + delta, ctx, p, mask);
        };
        step(dg, geo0, app0 + da, c.alpha_3d, c.sites.geo_from_app, {});
        step(da, app0, geo0 + dg, c.alpha_2d, c.sites.app_from_geo, {});
        if (use_local) {
            step(dg, geo0, state.local.vectors, c.lambda_3d, c.sites.geo_from_local, state.local.padded);
            step(da, app0, state.local.vectors, c.lambda_2d, c.sites.app_from_local, state.local.padded);
        }
        out.parts.parts[k].geo = part.geo + dg;
        out.parts.parts[k].app = part.app + da;
    });
    return out;
}

struct InterPartDeltas {
    std::vector<TokenSeq> geo;
    std::vector<TokenSeq> app;
    Matrix global;  // updated S^glb (rows in token order)
};

/// Residuals of the inter-part block. Message passing reads a snapshot of all
/// parts (simultaneous update); the global-guidance updates read the part's
/// own post-message value; the planner pools the post-guidance parts.
inline InterPartDeltas inter_part_deltas(const DenoiseState& state, const SyncCoefficients& c,
                                         bool update_planner = true) {
    detail::check_state_width(state, c);
    const auto& parts = state.parts.parts;
    const auto n = parts.size();
    const auto d = state.parts.dims.d;
    if (n == 0) throw InputError("inter-part sync over an empty object");

    std::vector<TokenSeq> geo0(n), app0(n);
    Eigen::Index geo_rows = 0, app_rows = 0;
    for (std::size_t k = 0; k < n; ++k) {
        geo0[k] = parts[k].geo.rowwise() + parts[k].identity.transpose();
        app0[k] = parts[k].app.rowwise() + parts[k].identity.transpose();
        geo_rows += geo0[k].rows();
        app_rows += app0[k].rows();
    }
    TokenSeq all_geo(geo_rows, d), all_app(app_rows, d);
    for (Eigen::Index k = 0, rg = 0, ra = 0; k < static_cast<Eigen::Index>(n); ++k) {
        all_geo.middleRows(rg, geo0[k].rows()) = geo0[k];
        all_app.middleRows(ra, app0[k].rows()) = app0[k];
        rg += geo0[k].rows();
        ra += app0[k].rows();
    }

    const Matrix global = global_matrix(state.global, d);
    const bool has_global = global.rows() > 0;

    InterPartDeltas out;
    out.geo.resize(n);
    out.app.resize(n);
    parallel_for(n, [&](std::size_t k) {
        TokenSeq dg = attention(geo0[k], all_geo, c.sites.geo_message);
        TokenSeq da = attention(app0[k], all_app, c.sites.app_message);
        if (has_global) {
            if (c.beta_3d != 0.0) dg += c.beta_3d * attention(geo0[k] + dg, global, c.sites.geo_from_global);
            if (c.beta_2d != 0.0) da += c.beta_2d * attention(app0[k] + da, global, c.sites.app_from_global);
        }
        out.geo[k] = std::move(dg);
        out.app[k] = std::move(da);
    });

    out.global = global;
    if (has_global && update_planner && c.eta != 0.0) {
        std::vector<Vector> pooled(n);
        for (std::size_t k = 0; k < n; ++k) pooled[k] = pool_part(geo0[k] + out.geo[k], app0[k] + out.app[k], c.pool_proj);
        out.global = global + c.eta * attention(global, stack_rows(pooled, d), c.sites.planner);
    }
    return out;
}

/// Message passing, global guidance (beta) and the planner update (eta). With
/// no global tokens the beta and eta updates are skipped.
inline DenoiseState inter_part_sync(const DenoiseState& state, const SyncCoefficients& c, bool update_planner = true) {
    auto deltas = inter_part_deltas(state, c, update_planner);
    DenoiseState out = state;
    for (std::size_t k = 0; k < out.parts.parts.size(); ++k) {
        out.parts.parts[k].geo += deltas.geo[k];
        out.parts.parts[k].app += deltas.app[k];
    }
    if (!out.global.empty()) out.global = with_global_matrix(std::move(out.global), deltas.global);
    return out;
}

}  // namespace partlat
