// Copyright (C) 2026 The partlat Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "partlat/denoiser.hpp"
#include "partlat/dpl.hpp"
#include "partlat/rsl.hpp"
#include "partlat/schedule.hpp"
#include "partlat/sync.hpp"

namespace partlat {

struct InversionOptions {
    int max_iterations = 100;
    double tolerance = 1e-12;  // relative to max(1, largest latent entry)
    int patience = 5;  // iterations without a new best residual before giving up
};

/// Everything a co-denoising run needs besides its inputs and seed.
struct CoDenoiser {
    NoiseSchedule schedule = make_schedule(50, ScheduleKind::CosineVp);
    SyncCoefficients sync;
    bool sync_enabled = true;
    // Planner updates of S^glb carry over to the next timestep; when false
    // every step starts from the initial S^glb.
    bool accumulate_planner = true;
    DenoiserSet denoisers;
    IdentityTable identities;
    InversionOptions inversion;
};

namespace detail {

inline void zero_padded_rows(LocalTokens& local) {
    for (std::size_t m = 0; m < local.padded.size(); ++m)
        if (local.padded[m]) local.vectors.row(static_cast<Eigen::Index>(m)).setZero();
}

inline Matrix pooled_parts(const ObjectLatents& obj, const Matrix& proj) {
    std::vector<Vector> rows;
    rows.reserve(obj.parts.size());
    for (const auto& p : obj.parts) rows.push_back(pool_part(p.geo, p.app, proj));
    return stack_rows(rows, obj.dims.d);
}

}  // namespace detail

/// Synchronized features of a state: intra-part then inter-part sync.
inline DenoiseState synchronize(const DenoiseState& state, const CoDenoiser& model, bool update_planner = true) {
    if (!model.sync_enabled) return state;
    return inter_part_sync(intra_part_sync(state, model.sync), model.sync, update_planner);
}

struct NoisePrediction {
    std::vector<TokenSeq> geo;
    std::vector<TokenSeq> app;
    TokenSeq local;
    GlobalTokens global;  // S^glb after this step's planner update
};

inline NoisePrediction predict_noise(const DenoiseState& state, const CoDenoiser& model, bool update_planner = true) {
    if (state.t < 1 || state.t > model.schedule.steps)
        throw InputError("cannot predict noise at timestep " + std::to_string(state.t));
    const DenoiseState feats = synchronize(state, model, update_planner);
    const int t = state.t;
    const double alpha = model.schedule.alpha_at(t);
    const double sigma = model.schedule.sigma_at(t);
    const Matrix global = global_matrix(feats.global, state.parts.dims.d);
    const auto n = state.parts.parts.size();

    NoisePrediction out;
    out.geo.resize(n);
    out.app.resize(n);
    parallel_for(n, [&](std::size_t k) {
        const PartLatent& p = feats.parts.parts[k];
        out.geo[k] = model.denoisers.geo.predict({StreamKind::Geometry, p.part_id, p.geo, p.app, global,
                                                  feats.local.vectors, feats.local.padded, t, alpha, sigma});
        out.app[k] = model.denoisers.app.predict({StreamKind::Appearance, p.part_id, p.app, p.geo, global,
                                                  feats.local.vectors, feats.local.padded, t, alpha, sigma});
    });
    const Matrix pooled = detail::pooled_parts(feats.parts, model.sync.pool_proj);
    out.local = model.denoisers.local.predict({StreamKind::Local, -1, feats.local.vectors, pooled, global,
                                               feats.local.vectors, feats.local.padded, t, alpha, sigma});
    out.global = feats.global;
    return out;
}

/// One deterministic DDIM move t -> t-1. Synchronization shapes the denoiser
/// inputs; the DDIM update itself acts on the noisy latents of `state`.
inline DenoiseState denoise_step(const DenoiseState& state, const CoDenoiser& model) {
    if (state.t < 1) throw InputError("denoise_step needs t >= 1");
    const auto pred = predict_noise(state, model, true);
    const int t = state.t;
    DenoiseState next = state;
    for (std::size_t k = 0; k < state.parts.parts.size(); ++k) {
        next.parts.parts[k].geo = ddim_update(state.parts.parts[k].geo, pred.geo[k], model.schedule, t);
        next.parts.parts[k].app = ddim_update(state.parts.parts[k].app, pred.app[k], model.schedule, t);
    }
    next.local.vectors = ddim_update(state.local.vectors, pred.local, model.schedule, t);
    detail::zero_padded_rows(next.local);
    if (model.accumulate_planner) next.global = pred.global;
    next.t = t - 1;
    return next;
}

/// Runs denoise_step down to t = 0.
inline DenoiseState denoise_to_zero(DenoiseState state, const CoDenoiser& model) {
    while (state.t > 0) state = denoise_step(state, model);
    return state;
}

/// Pure-noise start at t = T: Gaussian part streams from per-part sub-streams
/// of `seed`, S^{loc,T} by forward-noising the clean local tokens.
inline DenoiseState initial_state(int n_parts, const LatentDims& dims, const SemanticLatents& semantics,
                                  const CoDenoiser& model, std::uint64_t seed,
                                  const std::vector<std::string>& labels = {}) {
    if (n_parts < 1) throw InputError("need at least one part");
    if (model.identities.width() != dims.d) throw DimensionError("identity table width differs from latent width");
    const int T = model.schedule.steps;
    DenoiseState s;
    s.parts.dims = dims;
    for (int i = 0; i < n_parts; ++i) {
        Rng geo_rng = substream(seed, "geo", static_cast<std::uint64_t>(i));
        Rng app_rng = substream(seed, "app", static_cast<std::uint64_t>(i));
        std::optional<std::string> label;
        if (static_cast<std::size_t>(i) < labels.size() && !labels[i].empty()) label = labels[i];
        s.parts.parts.push_back(make_part_latent(random_normal_matrix(dims.geo_tokens, dims.d, geo_rng),
                                                 random_normal_matrix(dims.app_tokens, dims.d, app_rng), i,
                                                 model.identities, label));
    }
    s.local = semantics.local;
    if (s.local.vectors.rows() > 0) {
        require_width(s.local.vectors, dims.d, "local tokens");
        Rng loc_rng = substream(seed, "local");
        s.local.vectors = forward_noise(semantics.local.vectors, model.schedule, T,
                                        random_normal_matrix(s.local.vectors.rows(), dims.d, loc_rng));
        detail::zero_padded_rows(s.local);
    }
    s.global = semantics.global;
    s.t = T;
    return s;
}

/// Samples an object by denoising from T to 0. Deterministic in `seed`.
inline ObjectLatents sample(int n_parts, const LatentDims& dims, const SemanticLatents& semantics,
                            const CoDenoiser& model, std::uint64_t seed, const std::vector<std::string>& labels = {}) {
    return denoise_to_zero(initial_state(n_parts, dims, semantics, model, seed, labels), model).parts;
}

// ---------------------------------------------------------------------------
// Training objective

struct DiffusionSample {
    ObjectLatents clean;
    SemanticLatents semantics;
};

struct DiffusionLoss {
    double l3d = 0.0;
    double l2d = 0.0;
    double total = 0.0;  // batch mean of w_syn(t) * (L3D + L2D)
};

/// Per sample: t ~ U{1..T}, eps ~ N(0, I) from the seeded stream, per-part
/// squared noise-prediction errors averaged over parts.
inline DiffusionLoss diffusion_loss(const std::vector<DiffusionSample>& batch, const CoDenoiser& model,
                                    std::uint64_t seed) {
    if (batch.empty()) throw InputError("diffusion_loss needs a non-empty batch");
    DiffusionLoss loss;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& sample = batch[b];
        sample.clean.validate();
        Rng rng = substream(seed, "loss", b);
        const int t = static_cast<int>(rng.uniform_int(1, model.schedule.steps));
        DenoiseState state;
        state.parts = sample.clean;
        state.t = t;
        std::vector<TokenSeq> eps_geo, eps_app;
        for (auto& p : state.parts.parts) {
            eps_geo.push_back(random_normal_matrix(p.geo.rows(), p.geo.cols(), rng));
            eps_app.push_back(random_normal_matrix(p.app.rows(), p.app.cols(), rng));
            p.geo = forward_noise(p.geo, model.schedule, t, eps_geo.back());
            p.app = forward_noise(p.app, model.schedule, t, eps_app.back());
        }
        state.local = sample.semantics.local;
        if (state.local.vectors.rows() > 0) {
            state.local.vectors = forward_noise(state.local.vectors, model.schedule, t,
                                                random_normal_matrix(state.local.vectors.rows(),
                                                                     state.local.vectors.cols(), rng));
            detail::zero_padded_rows(state.local);
        }
        state.global = sample.semantics.global;
        const auto pred = predict_noise(state, model, true);
        double l3 = 0.0, l2 = 0.0;
        for (std::size_t k = 0; k < eps_geo.size(); ++k) {
            l3 += (eps_geo[k] - pred.geo[k]).squaredNorm();
            l2 += (eps_app[k] - pred.app[k]).squaredNorm();
        }
        l3 /= static_cast<double>(eps_geo.size());
        l2 /= static_cast<double>(eps_app.size());
        loss.l3d += l3;
        loss.l2d += l2;
        loss.total += snr_weight(model.schedule, t).w_syn * (l3 + l2);
    }
    const auto n = static_cast<double>(batch.size());
    loss.l3d /= n;
    loss.l2d /= n;
    loss.total /= n;
    return loss;
}

// ---------------------------------------------------------------------------
// Inversion and part editing

struct InversionResult {
    DenoiseState state;                     // at level tau
    std::vector<DenoiseState> trajectory;   // trajectory[t] for t = 0..tau
    double max_residual = 0.0;              // largest final fixed-point update
    int max_iterations = 0;
    int unconverged_steps = 0;              // levels that stopped above tolerance
};

namespace detail {

inline double max_abs_diff(const DenoiseState& a, const DenoiseState& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.parts.parts.size(); ++k) {
        m = std::max(m, (a.parts.parts[k].geo - b.parts.parts[k].geo).cwiseAbs().maxCoeff());
        m = std::max(m, (a.parts.parts[k].app - b.parts.parts[k].app).cwiseAbs().maxCoeff());
    }
    if (a.local.vectors.size() > 0) m = std::max(m, (a.local.vectors - b.local.vectors).cwiseAbs().maxCoeff());
    return m;
}

inline double max_abs_entry(const DenoiseState& a) {
    double m = 0.0;
    for (const auto& part : a.parts.parts) {
        m = std::max(m, part.geo.cwiseAbs().maxCoeff());
        m = std::max(m, part.app.cwiseAbs().maxCoeff());
    }
    if (a.local.vectors.size() > 0) m = std::max(m, a.local.vectors.cwiseAbs().maxCoeff());
    return m;
}

inline DenoiseState reverse_from(const DenoiseState& prev, const NoisePrediction& pred, const NoiseSchedule& sched,
                                 int t) {
    DenoiseState next = prev;
    for (std::size_t k = 0; k < prev.parts.parts.size(); ++k) {
        next.parts.parts[k].geo = ddim_reverse_update(prev.parts.parts[k].geo, pred.geo[k], sched, t);
        next.parts.parts[k].app = ddim_reverse_update(prev.parts.parts[k].app, pred.app[k], sched, t);
    }
    next.local.vectors = ddim_reverse_update(prev.local.vectors, pred.local, sched, t);
    zero_padded_rows(next.local);
    next.t = t;
    return next;
}

inline CoDenoiser frozen_planner(CoDenoiser model) {
    model.accumulate_planner = false;
    return model;
}

}  // namespace detail

/// Deterministic DDIM inversion of a clean object up to level tau with S^glb
/// held fixed. Each level solves x_t = reverse(x_{t-1}, eps(x_t)) by
/// fixed-point iteration so that denoise_step maps x_t back onto x_{t-1}.
inline InversionResult ddim_invert(const ObjectLatents& obj, const SemanticLatents& semantics, const CoDenoiser& model,
                                   int tau) {
    if (tau < 0 || tau > model.schedule.steps)
        throw InputError("tau " + std::to_string(tau) + " outside [0, " + std::to_string(model.schedule.steps) + "]");
    obj.validate();
    const CoDenoiser frozen = detail::frozen_planner(model);
    InversionResult result;
    DenoiseState start;
    start.parts = obj;
    start.local = semantics.local;
    detail::zero_padded_rows(start.local);
    start.global = semantics.global;
    start.t = 0;
    result.trajectory.push_back(start);

    for (int t = 1; t <= tau; ++t) {
        const DenoiseState& prev = result.trajectory.back();
        DenoiseState probe = prev;
        probe.t = t;
        DenoiseState x = detail::reverse_from(prev, predict_noise(probe, frozen, false), model.schedule, t);
        // Fixed-point iteration on x_t = F(x_t). When the map is not
        // contractive the residual stalls; keep the best iterate seen.
        const double tol = model.inversion.tolerance * std::max(1.0, detail::max_abs_entry(prev));
        DenoiseState best = x;
        double best_residual = std::numeric_limits<double>::infinity();
        int since_best = 0;
        int it = 0;
        for (; it < model.inversion.max_iterations; ++it) {
            DenoiseState next = detail::reverse_from(prev, predict_noise(x, frozen, false), model.schedule, t);
            const double residual = detail::max_abs_diff(next, x);
            if (!std::isfinite(residual)) throw NumericError("DDIM inversion diverged at t=" + std::to_string(t));
            x = std::move(next);
            if (residual < best_residual) {
                best_residual = residual;
                best = x;
                since_best = 0;
            } else if (++since_best >= model.inversion.patience) {
                break;
            }
            if (residual <= tol) break;
        }
        if (best_residual > tol) ++result.unconverged_steps;
        x = std::move(best);
        const double residual = best_residual;
        result.max_residual = std::max(result.max_residual, residual);
        result.max_iterations = std::max(result.max_iterations, std::min(it + 1, model.inversion.max_iterations));
        result.trajectory.push_back(std::move(x));
    }
    result.state = result.trajectory.back();
    return result;
}

/// One synchronization pass applied directly to clean latents, S^glb fixed.
inline ObjectLatents sync_pass(const ObjectLatents& obj, const SemanticLatents& semantics, const CoDenoiser& model) {
    DenoiseState s;
    s.parts = obj;
    s.local = semantics.local;
    detail::zero_padded_rows(s.local);
    s.global = semantics.global;
    s.t = 0;
    return synchronize(s, model, false).parts;
}

struct EditOptions {
    int tau = 25;
    int k_sync = 2;
};

struct EditResult {
    ObjectLatents object;
    InversionResult inversion;
};

/// Re-denoises one part from level tau under new local tokens. Non-target
/// parts are pinned to their inverted trajectory at every level; k_sync
/// synchronization passes over all parts follow at t = 0.
inline EditResult edit_part(const ObjectLatents& obj, int target_part_id, const LocalTokens& new_local,
                            const SemanticLatents& semantics, const CoDenoiser& model, const EditOptions& opt) {
    const auto target = std::find_if(obj.parts.begin(), obj.parts.end(),
                                     [&](const PartLatent& p) { return p.part_id == target_part_id; });
    if (target == obj.parts.end()) throw InputError("unknown target part " + std::to_string(target_part_id));
    const auto target_index = static_cast<std::size_t>(target - obj.parts.begin());
    if (new_local.vectors.rows() != semantics.local.vectors.rows() ||
        new_local.vectors.cols() != semantics.local.vectors.cols())
        throw DimensionError("edited local tokens must keep the K_m x d shape");
    if (opt.k_sync < 0) throw InputError("k_sync must be non-negative");

    const CoDenoiser frozen = detail::frozen_planner(model);
    EditResult result;
    result.inversion = ddim_invert(obj, semantics, frozen, opt.tau);

    DenoiseState state = result.inversion.state;
    // Shift the local stream by the change in its clean signal at level tau.
    LocalTokens clean_old = semantics.local;
    detail::zero_padded_rows(clean_old);
    LocalTokens clean_new = new_local;
    detail::zero_padded_rows(clean_new);
    state.local.vectors += model.schedule.alpha_at(opt.tau) * (clean_new.vectors - clean_old.vectors);
    state.local.padded = new_local.padded;
    state.local.phrases = new_local.phrases;
    detail::zero_padded_rows(state.local);

    while (state.t > 0) {
        DenoiseState next = denoise_step(state, frozen);
        const auto& pinned = result.inversion.trajectory[static_cast<std::size_t>(next.t)];
        for (std::size_t k = 0; k < next.parts.parts.size(); ++k) {
            if (k == target_index) continue;
            next.parts.parts[k].geo = pinned.parts.parts[k].geo;
            next.parts.parts[k].app = pinned.parts.parts[k].app;
        }
        state = std::move(next);
    }

    SemanticLatents edited{semantics.global, state.local};
    ObjectLatents out = state.parts;
    for (int pass = 0; pass < opt.k_sync; ++pass) out = sync_pass(out, edited, frozen);
    result.object = std::move(out);
    return result;
}

// ---------------------------------------------------------------------------
// Scene refinement

/// Jointly refines independently sampled objects. Each object becomes one
/// macro-part (pooled geometry and appearance tokens, identity row = object
/// index); inter-part sync runs over the macro-parts under S^scene and each
/// macro residual is added to every token of its object.
inline std::vector<ObjectLatents> scene_refine(const std::vector<ObjectLatents>& objects,
                                               const std::vector<RelationalTriplet>& scene_triplets,
                                               const std::vector<std::string>& object_names, const Embedder& emb,
                                               const CoDenoiser& model, int k_refine) {
    if (objects.empty()) throw InputError("scene needs at least one object");
    if (k_refine < 0) throw InputError("k_refine must be non-negative");
    const auto d = objects.front().dims.d;
    std::map<int, std::string> names;
    for (std::size_t o = 0; o < objects.size(); ++o) {
        objects[o].validate();
        if (objects[o].dims.d != d) throw DimensionError("scene objects have different latent widths");
        names[static_cast<int>(o)] = o < object_names.size() ? object_names[o] : "object " + std::to_string(o);
    }
    GlobalTokens scene_tokens = encode_global(scene_triplets, names, emb);

    std::vector<ObjectLatents> out = objects;
    const Matrix empty(0, d);
    for (int pass = 0; pass < k_refine; ++pass) {
        DenoiseState macro;
        macro.parts.dims = {d, 1, 1};
        for (std::size_t o = 0; o < out.size(); ++o) {
            Eigen::Index geo_rows = 0, app_rows = 0;
            for (const auto& p : out[o].parts) {
                geo_rows += p.geo.rows();
                app_rows += p.app.rows();
            }
            TokenSeq all_geo(geo_rows, d), all_app(app_rows, d);
            Eigen::Index rg = 0, ra = 0;
            for (const auto& p : out[o].parts) {
                all_geo.middleRows(rg, p.geo.rows()) = p.geo;
                all_app.middleRows(ra, p.app.rows()) = p.app;
                rg += p.geo.rows();
                ra += p.app.rows();
            }
            PartLatent m;
            m.part_id = static_cast<int>(o);
            m.geo = pool_part(all_geo, empty, model.sync.pool_proj).transpose();
            m.app = pool_part(all_app, empty, model.sync.pool_proj).transpose();
            m.identity = model.identities.row(static_cast<int>(o));
            macro.parts.parts.push_back(std::move(m));
        }
        macro.global = scene_tokens;
        const auto deltas = inter_part_deltas(macro, model.sync, true);
        for (std::size_t o = 0; o < out.size(); ++o) {
            for (auto& p : out[o].parts) {
                p.geo.rowwise() += deltas.geo[o].row(0);
                p.app.rowwise() += deltas.app[o].row(0);
            }
        }
        if (!scene_tokens.empty()) scene_tokens = with_global_matrix(std::move(scene_tokens), deltas.global);
    }
    return out;
}

}  // namespace partlat
