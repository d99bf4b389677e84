// Copyright (C) 2026 The partlat Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "partlat/error.hpp"
#include "partlat/rng.hpp"

namespace partlat {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// A token sequence is an (n_tokens x d) matrix, one token per row.
using TokenSeq = Eigen::MatrixXd;

// Rows flagged true are excluded from attention as keys/values. Empty = no mask.
using RowMask = std::vector<bool>;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) throw NumericError(std::string("non-finite values in ") + what);
}

inline void require_width(const Matrix& m, Eigen::Index d, const char* what) {
    if (m.cols() != d) {
        throw DimensionError(std::string(what) + ": width " + std::to_string(m.cols()) + ", expected " +
                             std::to_string(d));
    }
}

/// Projection matrices of one single-head attention site. Tokens are rows, so
/// projections are applied on the right: Q = X * w_q.
struct AttentionParams {
    enum class Init { Identity, Random };

    Matrix w_q;
    Matrix w_k;
    Matrix w_v;
    Init init = Init::Identity;
    std::uint64_t seed = 0;

    Eigen::Index width() const { return w_q.rows(); }

    static AttentionParams identity(Eigen::Index d) {
        AttentionParams p;
        p.w_q = Matrix::Identity(d, d);
        p.w_k = Matrix::Identity(d, d);
        p.w_v = Matrix::Identity(d, d);
        return p;
    }

    // Entries uniform in [-scale, scale]; scale <= 0 selects 1/sqrt(d).
    static AttentionParams random(Eigen::Index d, std::uint64_t seed, double scale = 0.0) {
        if (scale <= 0.0) scale = 1.0 / std::sqrt(static_cast<double>(d));
        Rng rng(seed);
        auto fill = [&](Matrix& m) {
            m.resize(d, d);
            for (Eigen::Index r = 0; r < d; ++r)
                for (Eigen::Index c = 0; c < d; ++c) m(r, c) = rng.uniform(-scale, scale);
        };
        AttentionParams p;
        fill(p.w_q);
        fill(p.w_k);
        fill(p.w_v);
        p.init = Init::Random;
        p.seed = seed;
        return p;
    }

    void validate() const {
        const auto d = w_q.rows();
        if (d < 1 || w_q.cols() != d || w_k.rows() != d || w_k.cols() != d || w_v.rows() != d || w_v.cols() != d)
            throw DimensionError("attention parameters must be square with a common width");
        require_finite(w_q, "w_q");
        require_finite(w_k, "w_k");
        require_finite(w_v, "w_v");
    }
};

namespace detail {

inline void check_attention_inputs(const TokenSeq& queries, const TokenSeq& context, const AttentionParams& params,
                                   const RowMask& mask) {
    params.validate();
    if (queries.rows() < 1 || context.rows() < 1) throw DimensionError("attention needs at least one token");
    require_width(queries, params.width(), "attention queries");
    require_width(context, params.width(), "attention context");
    if (!mask.empty() && static_cast<Eigen::Index>(mask.size()) != context.rows())
        throw DimensionError("attention mask length differs from context rows");
    require_finite(queries, "attention queries");
    require_finite(context, "attention context");
}

}  // namespace detail

inline bool mask_covers_all(const RowMask& mask, Eigen::Index rows) {
    if (mask.empty() || rows == 0) return false;
    for (bool masked : mask)
        if (!masked) return false;
    return true;
}

/// Row-stochastic weights softmax((X Wq)(Y Wk)^T / sqrt(d)), with masked context
/// columns forced to zero weight.
inline Matrix attention_weights(const TokenSeq& queries, const TokenSeq& context, const AttentionParams& params,
                                const RowMask& mask = {}) {
    detail::check_attention_inputs(queries, context, params, mask);
    if (!mask.empty() && mask_covers_all(mask, context.rows()))
        throw DimensionError("attention context is fully masked");

    const double scale = 1.0 / std::sqrt(static_cast<double>(params.width()));
    Matrix scores = (queries * params.w_q) * (context * params.w_k).transpose() * scale;
    if (mask.empty()) {
        const Vector row_max = scores.rowwise().maxCoeff();
        scores = (scores.colwise() - row_max).array().exp().matrix();
        const Vector total = scores.rowwise().sum();
        scores.array().colwise() /= total.array();
        return scores;
    }
    const auto n_ctx = context.rows();
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
        double row_max = -std::numeric_limits<double>::infinity();
        for (Eigen::Index c = 0; c < n_ctx; ++c)
            if (mask.empty() || !mask[c]) row_max = std::max(row_max, scores(r, c));
        double total = 0.0;
        for (Eigen::Index c = 0; c < n_ctx; ++c) {
            const double w = (mask.empty() || !mask[c]) ? std::exp(scores(r, c) - row_max) : 0.0;
            scores(r, c) = w;
            total += w;
        }
        scores.row(r) /= total;
    }
    return scores;
}

inline TokenSeq attention(const TokenSeq& queries, const TokenSeq& context, const AttentionParams& params,
                          const RowMask& mask = {}) {
    Matrix weights = attention_weights(queries, context, params, mask);
    TokenSeq out = weights * (context * params.w_v);
    require_finite(out, "attention output");
    return out;
}

/// target + coeff * Attn(target, source). A zero coefficient returns target
/// unchanged, bit for bit.
inline TokenSeq residual_update(const TokenSeq& target, const TokenSeq& source, double coeff,
                                const AttentionParams& params, const RowMask& mask = {}) {
    if (!std::isfinite(coeff)) throw NumericError("non-finite fusion coefficient");
    if (coeff == 0.0) {
        detail::check_attention_inputs(target, source, params, mask);
        return target;
    }
    return target + coeff * attention(target, source, params, mask);
}

inline Vector mean_rows(const TokenSeq& seq) {
    if (seq.rows() < 1) throw DimensionError("mean of an empty token sequence");
    return seq.colwise().mean().transpose();
}

/// proj * mean(rows of geo stacked over rows of app).
inline Vector pool_part(const TokenSeq& geo, const TokenSeq& app, const Matrix& proj) {
    if (geo.cols() != app.cols()) throw DimensionError("pool_part: geometry and appearance widths differ");
    if (proj.rows() != geo.cols() || proj.cols() != geo.cols())
        throw DimensionError("pool_part: projection must be d x d");
    const auto rows = geo.rows() + app.rows();
    if (rows < 1) throw DimensionError("pool_part: no tokens");
    Vector sum = Vector::Zero(geo.cols());
    if (geo.rows() > 0) sum += geo.colwise().sum().transpose();
    if (app.rows() > 0) sum += app.colwise().sum().transpose();
    Vector token = proj * (sum / static_cast<double>(rows));
    if (!token.allFinite()) throw NumericError("pool_part: non-finite summary");
    return token;
}

inline Matrix stack_rows(const std::vector<Vector>& rows, Eigen::Index d) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), d);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        require_width(rows[i].transpose(), d, "stacked row");
        out.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    }
    return out;
}

inline Matrix random_uniform_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale) {
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-scale, scale);
    return m;
}

inline Matrix random_normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.normal();
    return m;
}

}  // namespace partlat
