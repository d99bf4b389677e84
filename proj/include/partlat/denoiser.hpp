// Copyright (C) 2026 The partlat Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <variant>

#include "partlat/latent_math.hpp"
#include "partlat/reference_mlp.hpp"

namespace partlat {

enum class StreamKind { Geometry, Appearance, Local };

struct DenoiserInput {
    StreamKind kind = StreamKind::Geometry;
    int part_id = -1;           // -1 for the local semantic stream
    const TokenSeq& stream;     // synchronized features of the stream being denoised
    const TokenSeq& cross;      // paired stream (or pooled part summaries for the local stream)
    const Matrix& global;       // S^glb, possibly zero rows
    const TokenSeq& local;      // S^{loc,t}
    const RowMask& local_mask;  // padded rows of S^{loc,t}
    int t = 0;
    double alpha = 1.0;
    double sigma = 0.0;
};

/// Bayes-optimal noise predictor for i.i.d. N(mean, stddev^2) data:
/// E[eps | x_t] = sigma (x_t - alpha mean) / (alpha^2 stddev^2 + sigma^2).
struct AnalyticGaussian {
    double mean = 0.0;
    double stddev = 1.0;

    TokenSeq predict(const DenoiserInput& in) const {
        const double var = in.alpha * in.alpha * stddev * stddev + in.sigma * in.sigma;
        return (in.sigma / var) * (in.stream.array() - in.alpha * mean).matrix();
    }
};

struct MlpDenoiser {
    ReferenceMlp model;

    TokenSeq predict(const DenoiserInput& in) const {
        return model.forward(model.features(in.stream, in.cross, in.alpha, in.sigma));
    }
};

using DenoiserFn = std::function<TokenSeq(const DenoiserInput&)>;

/// Noise predictor for one stream. Parameters are immutable during sampling;
/// predict() may be called concurrently.
class Denoiser {
public:
    Denoiser() : impl_(AnalyticGaussian{}) {}
    explicit Denoiser(AnalyticGaussian a) : impl_(a) {}
    explicit Denoiser(ReferenceMlp m) : impl_(MlpDenoiser{std::move(m)}) {}
    explicit Denoiser(DenoiserFn fn) : impl_(std::move(fn)) {}

    std::string_view mode() const {
        if (std::holds_alternative<AnalyticGaussian>(impl_)) return "analytic-gaussian";
        if (std::holds_alternative<MlpDenoiser>(impl_)) return "reference-mlp";
        return "custom";
    }

    TokenSeq predict(const DenoiserInput& in) const {
        TokenSeq out = std::visit(
            [&](const auto& impl) -> TokenSeq {
                if constexpr (std::is_same_v<std::decay_t<decltype(impl)>, DenoiserFn>) return impl(in);
                else return impl.predict(in);
            },
            impl_);
        if (out.rows() != in.stream.rows() || out.cols() != in.stream.cols())
            throw DimensionError("denoiser returned " + std::to_string(out.rows()) + "x" + std::to_string(out.cols()) +
                                 " for a " + std::to_string(in.stream.rows()) + "x" +
                                 std::to_string(in.stream.cols()) + " stream");
        require_finite(out, "denoiser output");
        return out;
    }

    const ReferenceMlp* mlp() const {
        const auto* m = std::get_if<MlpDenoiser>(&impl_);
        return m ? &m->model : nullptr;
    }
    const AnalyticGaussian* analytic() const { return std::get_if<AnalyticGaussian>(&impl_); }

private:
    std::variant<AnalyticGaussian, MlpDenoiser, DenoiserFn> impl_;
};

// N_3D, N_2D and the local-token denoiser.
struct DenoiserSet {
    Denoiser geo;
    Denoiser app;
    Denoiser local;

    static DenoiserSet analytic(double mean, double stddev) {
        const AnalyticGaussian a{mean, stddev};
        return {Denoiser(a), Denoiser(a), Denoiser(a)};
    }

    static DenoiserSet reference_mlp(Eigen::Index d, Eigen::Index hidden, std::uint64_t seed) {
        return {Denoiser(ReferenceMlp::random(d, hidden, substream_seed(seed, "denoiser-geo"))),
                Denoiser(ReferenceMlp::random(d, hidden, substream_seed(seed, "denoiser-app"))),
                Denoiser(ReferenceMlp::random(d, hidden, substream_seed(seed, "denoiser-local")))};
    }
};

}  // namespace partlat
