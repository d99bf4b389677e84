// Copyright (C) 2026 The partlat Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <span>
#include <sstream>
#include <vector>

#include "partlat/latent_math.hpp"
#include "partlat/schedule.hpp"

namespace partlat {

/// Token-wise two-layer network used as the trainable reference denoiser:
///
///   z_k = [x_k, mean(cross), alpha_t, sigma_t]        (2d + 2 features)
///   h_k = tanh(W1 z_k + b1)
///   out_k = W2 h_k + b2
///
/// For a weighted squared loss L = w * sum_k |eps_k - out_k|^2 the gradients are
///   g_k = -2 w (eps_k - out_k)
///   dW2 = sum_k g_k h_k^T,  db2 = sum_k g_k
///   a_k = (W2^T g_k) * (1 - h_k^2)
///   dW1 = sum_k a_k z_k^T,  db1 = sum_k a_k
class ReferenceMlp {
public:
    ReferenceMlp() = default;

    static ReferenceMlp random(Eigen::Index d, Eigen::Index hidden, std::uint64_t seed) {
        if (d < 1 || hidden < 1) throw DimensionError("reference MLP needs positive widths");
        ReferenceMlp m;
        Rng rng = substream(seed, "reference-mlp");
        const Eigen::Index in = 2 * d + 2;
        m.w1 = random_uniform_matrix(hidden, in, rng, 1.0 / std::sqrt(static_cast<double>(in)));
        m.b1 = Vector::Zero(hidden);
        m.w2 = random_uniform_matrix(d, hidden, rng, 1.0 / std::sqrt(static_cast<double>(hidden)));
        m.b2 = Vector::Zero(d);
        return m;
    }

    Eigen::Index width() const { return w2.rows(); }
    Eigen::Index hidden() const { return w1.rows(); }
    Eigen::Index input_width() const { return w1.cols(); }

    Matrix features(const TokenSeq& stream, const TokenSeq& cross, double alpha, double sigma) const {
        const auto d = width();
        require_width(stream, d, "reference MLP stream");
        Matrix z(stream.rows(), input_width());
        z.leftCols(d) = stream;
        if (cross.rows() > 0) {
            require_width(cross, d, "reference MLP cross stream");
            z.middleCols(d, d).rowwise() = cross.colwise().mean();
        } else {
            z.middleCols(d, d).setZero();
        }
        z.col(2 * d).setConstant(alpha);
        z.col(2 * d + 1).setConstant(sigma);
        return z;
    }

    Matrix hidden_activations(const Matrix& z) const {
        Matrix pre = z * w1.transpose();
        pre.rowwise() += b1.transpose();
        return pre.array().tanh().matrix();
    }

    Matrix forward(const Matrix& z) const {
        Matrix out = hidden_activations(z) * w2.transpose();
        out.rowwise() += b2.transpose();
        return out;
    }

    std::size_t parameter_count() const {
        return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size());
    }

    // Flat order: W1 row-major, b1, W2 row-major, b2.
    std::vector<double> parameters() const {
        std::vector<double> p;
        p.reserve(parameter_count());
        auto put = [&](const Matrix& m) {
            for (Eigen::Index r = 0; r < m.rows(); ++r)
                for (Eigen::Index c = 0; c < m.cols(); ++c) p.push_back(m(r, c));
        };
        put(w1);
        put(b1);
        put(w2);
        put(b2);
        return p;
    }

    void set_parameters(std::span<const double> p) {
        if (p.size() != parameter_count()) throw DimensionError("parameter vector has the wrong length");
        std::size_t k = 0;
        auto get = [&](auto& m) {
            for (Eigen::Index r = 0; r < m.rows(); ++r)
                for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = p[k++];
        };
        get(w1);
        get(b1);
        get(w2);
        get(b2);
    }

    // Adds w * |eps - out|^2 to the loss and its gradient into `grad` (flat order).
    double accumulate(const Matrix& z, const TokenSeq& eps, double weight, std::vector<double>& grad) const {
        if (grad.size() != parameter_count()) grad.assign(parameter_count(), 0.0);
        const Matrix h = hidden_activations(z);
        Matrix out = h * w2.transpose();
        out.rowwise() += b2.transpose();
        const Matrix resid = eps - out;
        const double loss = weight * resid.squaredNorm();

        const Matrix g = -2.0 * weight * resid;  // n x d
        const Matrix dw2 = g.transpose() * h;    // d x H
        const Vector db2 = g.colwise().sum().transpose();
        const Matrix a = (g * w2).array() * (1.0 - h.array().square());  // n x H
        const Matrix dw1 = a.transpose() * z;                             // H x in
        const Vector db1 = a.colwise().sum().transpose();

        std::size_t k = 0;
        auto add = [&](const auto& m) {
            for (Eigen::Index r = 0; r < m.rows(); ++r)
                for (Eigen::Index c = 0; c < m.cols(); ++c) grad[k++] += m(r, c);
        };
        add(dw1);
        add(db1);
        add(dw2);
        add(db2);
        return loss;
    }

    Matrix w1, w2;
    Vector b1, b2;
};

struct TrainExample {
    TokenSeq clean;
    TokenSeq cross;  // may have zero rows
};

enum class CurriculumPhase {
    Denoise,     // unit weight on every timestep
    Synchronize  // losses weighted by w_syn(t)
};

struct TrainOptions {
    int steps = 500;
    double lr = 1e-2;
    int batch = 32;
    std::uint64_t seed = 0;
    CurriculumPhase phase = CurriculumPhase::Denoise;
    double weight_decay = 0.0;
    double clip_norm = 1.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
};

struct TrainReport {
    ReferenceMlp model;
    std::vector<double> losses;  // mean batch loss per step
};

namespace detail {

struct DrawnSample {
    Matrix features;
    TokenSeq eps;
    double weight = 1.0;
};

inline DrawnSample draw_training_sample(const ReferenceMlp& model, const TrainExample& ex, const NoiseSchedule& sched,
                                        Rng& rng, CurriculumPhase phase) {
    const int t = static_cast<int>(rng.uniform_int(1, sched.steps));
    DrawnSample s;
    s.eps = random_normal_matrix(ex.clean.rows(), ex.clean.cols(), rng);
    const TokenSeq x_t = forward_noise(ex.clean, sched, t, s.eps);
    TokenSeq cross_t = ex.cross;
    if (ex.cross.rows() > 0)
        cross_t = forward_noise(ex.cross, sched, t, random_normal_matrix(ex.cross.rows(), ex.cross.cols(), rng));
    s.features = model.features(x_t, cross_t, sched.alpha_at(t), sched.sigma_at(t));
    s.weight = phase == CurriculumPhase::Synchronize ? snr_weight(sched, t).w_syn : 1.0;
    return s;
}

}  // namespace detail

/// Mean weighted loss and its gradient over `samples` draws from the seeded
/// stream; the same seed always draws the same (example, t, eps) triples.
inline double mlp_batch_loss(const ReferenceMlp& model, const std::vector<TrainExample>& data,
                             const NoiseSchedule& sched, std::uint64_t seed, int samples, CurriculumPhase phase,
                             std::vector<double>* grad = nullptr) {
    if (data.empty()) throw InputError("training data is empty");
    Rng rng(seed);
    std::vector<double> g(model.parameter_count(), 0.0);
    double total = 0.0;
    for (int b = 0; b < samples; ++b) {
        const auto& ex = data[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(data.size()) - 1))];
        const auto s = detail::draw_training_sample(model, ex, sched, rng, phase);
        total += model.accumulate(s.features, s.eps, s.weight / samples, g);
    }
    if (grad) *grad = std::move(g);
    return total;
}

/// AdamW on the reference MLP with global-norm gradient clipping.
inline TrainReport train_reference(const ReferenceMlp& init, const std::vector<TrainExample>& data,
                                   const NoiseSchedule& sched, const TrainOptions& opt) {
    if (opt.steps < 0 || opt.batch < 1) throw InputError("invalid training options");
    TrainReport report{init, {}};
    auto params = init.parameters();
    std::vector<double> m(params.size(), 0.0), v(params.size(), 0.0), grad;
    for (int step = 0; step < opt.steps; ++step) {
        const double loss = mlp_batch_loss(report.model, data, sched, substream_seed(opt.seed, "train-step", step),
                                           opt.batch, opt.phase, &grad);
        if (!std::isfinite(loss)) {
            std::ostringstream msg;
            msg << "training diverged at step " << step << " (loss " << loss << ", lr " << opt.lr << ")";
            throw NumericError(msg.str());
        }
        report.losses.push_back(loss);
        double norm = 0.0;
        for (double g : grad) norm += g * g;
        norm = std::sqrt(norm);
        const double scale = (opt.clip_norm > 0.0 && norm > opt.clip_norm) ? opt.clip_norm / norm : 1.0;
        const double bc1 = 1.0 - std::pow(opt.beta1, step + 1);
        const double bc2 = 1.0 - std::pow(opt.beta2, step + 1);
        for (std::size_t k = 0; k < params.size(); ++k) {
            const double g = grad[k] * scale;
            m[k] = opt.beta1 * m[k] + (1.0 - opt.beta1) * g;
            v[k] = opt.beta2 * v[k] + (1.0 - opt.beta2) * g * g;
            const double update = (m[k] / bc1) / (std::sqrt(v[k] / bc2) + opt.adam_eps) + opt.weight_decay * params[k];
            params[k] -= opt.lr * update;
        }
        report.model.set_parameters(params);
    }
    return report;
}

}  // namespace partlat
