// Copyright (C) 2026 The partlat Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "partlat/latent_math.hpp"

namespace partlat {

enum class ScheduleKind { LinearVp, CosineVp };

inline std::string_view to_string(ScheduleKind k) { return k == ScheduleKind::LinearVp ? "linear" : "cosine"; }

inline ScheduleKind parse_schedule_kind(std::string_view s) {
    if (s == "linear" || s == "linear-vp") return ScheduleKind::LinearVp;
    if (s == "cosine" || s == "cosine-vp") return ScheduleKind::CosineVp;
    throw InputError("unknown schedule kind '" + std::string(s) + "'");
}

inline constexpr double kAlphaClip = 1e-4;

/// Variance-preserving schedule on the grid t = 0..T: alpha_t^2 + sigma_t^2 = 1.
struct NoiseSchedule {
    int steps = 0;  // T
    ScheduleKind kind = ScheduleKind::CosineVp;
    std::vector<double> alpha;  // T + 1 entries
    std::vector<double> sigma;

    double alpha_at(int t) const { return alpha.at(static_cast<std::size_t>(t)); }
    double sigma_at(int t) const { return sigma.at(static_cast<std::size_t>(t)); }

    void check_t(int t) const {
        if (t < 0 || t > steps)
            throw InputError("timestep " + std::to_string(t) + " outside [0, " + std::to_string(steps) + "]");
    }
};

/// cosine: alpha_t = cos(pi/2 * t/T); linear: alpha_t^2 = 1 - t/T. Both
/// clip alpha to [1e-4, 1 - 1e-4] and set sigma_t = sqrt(1 - alpha_t^2).
inline NoiseSchedule make_schedule(int steps, ScheduleKind kind) {
    if (steps < 2) throw InputError("schedule needs at least 2 steps");
    NoiseSchedule s;
    s.steps = steps;
    s.kind = kind;
    s.alpha.resize(static_cast<std::size_t>(steps) + 1);
    s.sigma.resize(s.alpha.size());
    for (int t = 0; t <= steps; ++t) {
        const double frac = static_cast<double>(t) / static_cast<double>(steps);
        double a = kind == ScheduleKind::CosineVp ? std::cos(0.5 * std::numbers::pi * frac) : std::sqrt(1.0 - frac);
        a = std::clamp(a, kAlphaClip, 1.0 - kAlphaClip);
        s.alpha[t] = a;
        s.sigma[t] = std::sqrt(1.0 - a * a);
    }
    return s;
}

struct SnrWeight {
    double snr = 0.0;
    double w_syn = 0.0;  // snr / (1 + snr), which equals alpha_t^2 on a VP schedule
};

inline SnrWeight snr_weight(const NoiseSchedule& sched, int t) {
    sched.check_t(t);
    const double a = sched.alpha_at(t);
    const double s = sched.sigma_at(t);
    if (s == 0.0) return {std::numeric_limits<double>::infinity(), 1.0};
    const double snr = (a * a) / (s * s);
    return {snr, snr / (1.0 + snr)};
}

inline TokenSeq forward_noise(const TokenSeq& clean, const NoiseSchedule& sched, int t, const TokenSeq& noise) {
    sched.check_t(t);
    if (clean.rows() != noise.rows() || clean.cols() != noise.cols())
        throw DimensionError("forward_noise: clean and noise shapes differ");
    return sched.alpha_at(t) * clean + sched.sigma_at(t) * noise;
}

// x0_hat = (x_t - sigma_t * eps) / alpha_t
inline TokenSeq predict_clean(const TokenSeq& x_t, const TokenSeq& eps, const NoiseSchedule& sched, int t) {
    sched.check_t(t);
    return (x_t - sched.sigma_at(t) * eps) / sched.alpha_at(t);
}

// Deterministic DDIM move t -> t-1: alpha_{t-1} * x0_hat + sigma_{t-1} * eps.
inline TokenSeq ddim_update(const TokenSeq& x_t, const TokenSeq& eps, const NoiseSchedule& sched, int t) {
    if (t < 1) throw InputError("ddim_update needs t >= 1");
    if (x_t.rows() != eps.rows() || x_t.cols() != eps.cols())
        throw DimensionError("denoiser output shape differs from its input stream");
    const TokenSeq x0 = predict_clean(x_t, eps, sched, t);
    return sched.alpha_at(t - 1) * x0 + sched.sigma_at(t - 1) * eps;
}

// Inverse of ddim_update for a given noise estimate: x_{t-1} -> x_t.
inline TokenSeq ddim_reverse_update(const TokenSeq& x_prev, const TokenSeq& eps, const NoiseSchedule& sched, int t) {
    if (t < 1) throw InputError("ddim_reverse_update needs t >= 1");
    const TokenSeq x0 = predict_clean(x_prev, eps, sched, t - 1);
    return sched.alpha_at(t) * x0 + sched.sigma_at(t) * eps;
}

}  // namespace partlat
