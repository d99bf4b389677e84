// Copyright (C) 2026 The partlat Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "partlat/articulate.hpp"
#include "partlat/codenoise.hpp"
#include "partlat/config.hpp"
#include "partlat/dpl.hpp"
#include "partlat/metrics.hpp"
#include "partlat/pointcloud_io.hpp"
#include "partlat/relations.hpp"
#include "partlat/rsl.hpp"

namespace partlat {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitInput = 2, kExitNumeric = 3 };

namespace cli {

namespace fs = std::filesystem;

struct Context {
    RunConfig config;
    bool manifest_only = false;
    std::ostream* out = nullptr;
};

// Writes `bytes` and records its hash; a dry run writes nothing.
inline void emit(Context& ctx, Manifest& m, const fs::path& path, const std::string& bytes) {
    if (ctx.manifest_only) return;
    write_file_atomic(path, bytes);
    m.add_output(path, bytes);
}

inline void finish(Context& ctx, Manifest& m, const fs::path& manifest_path) {
    m.config = ctx.config;
    if (ctx.manifest_only) m.extra["dry_run"] = true;
    const std::string text = m.to_json().dump(2) + "\n";
    write_file_atomic(manifest_path, text);
    if (ctx.manifest_only) *ctx.out << text;
}

inline fs::path manifest_path_for(const fs::path& out) {
    fs::path p = out;
    p += ".manifest.json";
    return p;
}

inline std::vector<std::string> read_phrases(const fs::path& path) {
    std::vector<std::string> phrases;
    for (const auto& line : read_lines(path)) {
        const auto t = trim(line);
        if (!t.empty() && t.front() != '#') phrases.push_back(t);
    }
    return phrases;
}

// Part names from a parts file (first object, or `object` when given).
inline std::map<int, std::string> read_part_names(const fs::path& path, const std::string& object) {
    const auto all = read_parts(path);
    if (all.empty()) throw InputError(path.string() + ": no parts");
    const auto it = object.empty() ? all.begin() : all.find(object);
    if (it == all.end()) throw InputError(path.string() + ": no parts for object '" + object + "'");
    std::map<int, std::string> names;
    for (const auto& p : it->second) names[p.part_id] = p.label;
    return names;
}

inline std::vector<RelationalTriplet> triplets_for(const fs::path& path, const std::string& object) {
    std::vector<RelationalTriplet> out;
    for (auto& r : read_triplets(path))
        if (object.empty() || r.object_id == object) out.push_back(std::move(r.triplet));
    return out;
}

struct SemanticInputs {
    std::string triplets;
    std::string part_names;
    std::string phrases;
    std::string object;
    std::string embedder;
};

inline SemanticLatents build_semantics(const SemanticInputs& in, int n_parts, const Embedder& emb, const RunConfig& c,
                                       Manifest& m) {
    std::map<int, std::string> names;
    if (!in.part_names.empty()) {
        names = read_part_names(in.part_names, in.object);
        m.add_input(in.part_names);
    } else {
        for (int i = 0; i < n_parts; ++i) names[i] = "part " + std::to_string(i);
    }
    SemanticLatents s;
    if (!in.triplets.empty()) {
        s.global = encode_global(triplets_for(in.triplets, in.object), names, emb);
        m.add_input(in.triplets);
    }
    std::vector<std::string> phrases;
    if (!in.phrases.empty()) {
        phrases = read_phrases(in.phrases);
        m.add_input(in.phrases);
    }
    s.local = encode_local(phrases, c.local_tokens, emb);
    return s;
}

// "hash" or "file:<path>".
inline void apply_embedder_flag(RunConfig& c, const std::string& flag) {
    if (flag.empty()) return;
    if (flag == "hash") {
        c.embedder.mode = "hash";
    } else if (flag.starts_with("file:") && flag.size() > 5) {
        c.embedder.mode = "file";
        c.embedder.file = flag.substr(5);
    } else {
        throw UsageError("--embedder expects 'hash' or 'file:<path>', got '" + flag + "'");
    }
}

inline void add_semantic_options(CLI::App* cmd, SemanticInputs& in) {
    cmd->add_option("--triplets", in.triplets, "Triplet file (TSV) supplying global tokens");
    cmd->add_option("--part-names", in.part_names, "Parts file naming each part id");
    cmd->add_option("--phrases", in.phrases, "Attribute phrases, one per line (local tokens)");
    cmd->add_option("--object", in.object, "Object id to select from the triplet and parts files");
    cmd->add_option("--embedder", in.embedder, "Text embedder: hash or file:<path>");
}

inline std::string pltf_path_stem(const fs::path& p) { return p.stem().string(); }

inline nlohmann::ordered_json transform_json(const RigidTransform& t) {
    nlohmann::ordered_json r = nlohmann::ordered_json::array();
    for (int i = 0; i < 3; ++i) r.push_back({t.rotation(i, 0), t.rotation(i, 1), t.rotation(i, 2)});
    return {{"rotation", r}, {"translation", {t.translation(0), t.translation(1), t.translation(2)}}};
}

}  // namespace cli

/// Runs one CLI invocation. `args` excludes the program name. Returns the
/// process exit status: 0 ok, 1 usage, 2 input validation, 3 numeric failure.
inline int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    using namespace cli;
    CLI::App app{"partlat: part-level latent co-denoising toolkit", "partlat"};
    app.require_subcommand(1);
    bool show_version = false;
    std::string config_path;
    Context ctx;
    ctx.out = &out;
    app.add_flag("--version", show_version, "Print the tool version and exit");
    app.add_flag("--manifest-only", ctx.manifest_only, "Validate inputs and write only the run manifest");
    app.add_option("--config", config_path, "Run configuration (JSON)");

    std::function<void()> action;
    Manifest manifest;

    // canonicalize ---------------------------------------------------------
    struct {
        std::string captions, parts, out, embedder, stats;
    } canon;
    auto* c_canon = app.add_subcommand("canonicalize", "Captions to canonical relational triplets");
    c_canon->add_option("--captions", canon.captions, "Captions file")->required();
    c_canon->add_option("--parts", canon.parts, "Parts file")->required();
    c_canon->add_option("--out", canon.out, "Triplet file to write")->required();
    c_canon->add_option("--embedder", canon.embedder, "Text embedder: hash or file:<path>");
    c_canon->add_option("--stats", canon.stats, "Also write corpus statistics (JSON)");
    c_canon->callback([&] {
        action = [&] {
            apply_embedder_flag(ctx.config, canon.embedder);
            validate_config(ctx.config);
            manifest.add_input(canon.captions);
            manifest.add_input(canon.parts);
            const auto captions = read_captions(canon.captions);
            const auto parts = read_parts(canon.parts);
            const Embedder emb = make_embedder(ctx.config);
            std::vector<TripletRecord> records;
            std::vector<CorpusObject> corpus;
            for (const auto& [object, vocab] : parts) {
                CorpusObject obj{object, "", "train", vocab, {}};
                if (const auto it = captions.find(object); it != captions.end())
                    obj.triplets = canonicalize(it->second, vocab, emb, ctx.config.predicate_floor);
                for (const auto& t : obj.triplets) records.push_back({object, t});
                corpus.push_back(std::move(obj));
            }
            for (const auto& [object, caps] : captions)
                if (!parts.contains(object)) throw InputError("captions for object '" + object + "' have no parts");
            emit(ctx, manifest, canon.out, format_triplets(records));
            if (!canon.stats.empty()) emit(ctx, manifest, canon.stats, dataset_stats(corpus).to_json().dump(2) + "\n");
            finish(ctx, manifest, manifest_path_for(canon.out));
        };
    });

    // validate -------------------------------------------------------------
    struct {
        std::string triplets, geometry, out;
        std::optional<double> eps;
    } val;
    auto* c_val = app.add_subcommand("validate", "Check triplets against part bounding boxes");
    c_val->add_option("--triplets", val.triplets, "Triplet file")->required();
    c_val->add_option("--geometry", val.geometry, "Part geometry file")->required();
    c_val->add_option("--eps", val.eps, "Ordering slack (fraction of the union extent)");
    c_val->add_option("--out", val.out, "Report to write (JSON)")->required();
    c_val->callback([&] {
        action = [&] {
            if (val.eps) ctx.config.thresholds.eps_rel = *val.eps;
            validate_config(ctx.config);
            manifest.add_input(val.triplets);
            manifest.add_input(val.geometry);
            const auto records = read_triplets(val.triplets);
            const auto geometry = read_part_geometry(val.geometry);
            nlohmann::ordered_json rows = nlohmann::ordered_json::array();
            std::map<std::string, std::size_t> counts{{"valid", 0}, {"violated", 0}, {"unchecked", 0}};
            for (const auto& r : records) {
                const auto g = geometry.find(r.object_id);
                if (g == geometry.end()) throw InputError("no geometry for object '" + r.object_id + "'");
                std::map<int, Aabb> boxes;
                Aabb object_box;
                bool first = true;
                for (const auto& [part, cloud] : g->second) {
                    boxes[part] = compute_aabb(cloud);
                    object_box = first ? boxes[part] : box_union(object_box, boxes[part]);
                    first = false;
                }
                const auto res = validate_triplet(r.triplet, boxes, ctx.config.thresholds, object_box);
                ++counts[std::string(to_string(res.status))];
                rows.push_back({{"object", r.object_id},
                                {"i", r.triplet.i},
                                {"j", r.triplet.j},
                                {"predicate", std::string(r.triplet.predicate.name())},
                                {"status", std::string(to_string(res.status))},
                                {"reason", res.reason}});
            }
            nlohmann::ordered_json report;
            report["summary"] = counts;
            report["triplets"] = rows;
            emit(ctx, manifest, val.out, report.dump(2) + "\n");
            finish(ctx, manifest, manifest_path_for(val.out));
        };
    });

    // sample ---------------------------------------------------------------
    struct {
        int parts = 0;
        SemanticInputs sem;
        std::string schedule, out;
        std::optional<int> steps;
        std::optional<std::uint64_t> seed;
    } smp;
    auto* c_smp = app.add_subcommand("sample", "Sample part latents by co-denoising");
    c_smp->add_option("--parts", smp.parts, "Number of parts")->required();
    add_semantic_options(c_smp, smp.sem);
    c_smp->add_option("--schedule", smp.schedule, "Noise schedule: linear or cosine");
    c_smp->add_option("--steps", smp.steps, "Number of timesteps T");
    c_smp->add_option("--seed", smp.seed, "Root seed");
    c_smp->add_option("--out", smp.out, "PLTF file to write")->required();
    c_smp->callback([&] {
        action = [&] {
            if (!smp.schedule.empty()) ctx.config.schedule.kind = parse_schedule_kind(smp.schedule);
            if (smp.steps) ctx.config.schedule.steps = *smp.steps;
            if (smp.seed) ctx.config.seed = *smp.seed;
            apply_embedder_flag(ctx.config, smp.sem.embedder);
            validate_config(ctx.config);
            if (smp.parts < 1) throw InputError("--parts must be at least 1");
            if (smp.parts > ctx.config.identity_slots)
                throw InputError("--parts exceeds identity_slots (" + std::to_string(ctx.config.identity_slots) + ")");
            const Embedder emb = make_embedder(ctx.config);
            const CoDenoiser model = make_codenoiser(ctx.config);
            const auto sem = build_semantics(smp.sem, smp.parts, emb, ctx.config, manifest);
            std::vector<std::string> labels;
            if (!smp.sem.part_names.empty())
                for (const auto& [id, name] : read_part_names(smp.sem.part_names, smp.sem.object))
                    if (id >= 0 && id < smp.parts) {
                        labels.resize(static_cast<std::size_t>(smp.parts));
                        labels[static_cast<std::size_t>(id)] = name;
                    }
            std::string bytes;
            if (!ctx.manifest_only)
                bytes = encode_pltf(sample(smp.parts, ctx.config.dims, sem, model, ctx.config.seed, labels));
            emit(ctx, manifest, smp.out, bytes);
            finish(ctx, manifest, manifest_path_for(smp.out));
        };
    });

    // edit -----------------------------------------------------------------
    struct {
        std::string in, out, old_phrases;
        int target = 0;
        SemanticInputs sem;
        std::optional<int> tau, k_sync;
    } ed;
    auto* c_ed = app.add_subcommand("edit", "Re-denoise one part under new attribute phrases");
    c_ed->add_option("--in", ed.in, "Input PLTF")->required();
    c_ed->add_option("--target", ed.target, "Part id to edit")->required();
    add_semantic_options(c_ed, ed.sem);
    c_ed->add_option("--old-phrases", ed.old_phrases, "Phrases the object was generated with");
    c_ed->add_option("--tau", ed.tau, "Inversion depth (default T/2)");
    c_ed->add_option("--k-sync", ed.k_sync, "Synchronization passes after re-denoising");
    c_ed->add_option("--out", ed.out, "PLTF file to write (default <in>.edited.pltf)");
    c_ed->callback([&] {
        action = [&] {
            if (ed.tau) ctx.config.edit.tau = *ed.tau;
            if (ed.k_sync) ctx.config.edit.k_sync = *ed.k_sync;
            apply_embedder_flag(ctx.config, ed.sem.embedder);
            if (ed.out.empty()) ed.out = (fs::path(ed.in).parent_path() / (fs::path(ed.in).stem().string() + ".edited.pltf")).string();
            validate_config(ctx.config);
            manifest.add_input(ed.in);
            const ObjectLatents obj = read_pltf(ed.in);
            if (obj.dims.d != ctx.config.dims.d) throw InputError("input latent width differs from latent.d");
            const Embedder emb = make_embedder(ctx.config);
            CoDenoiser model = make_codenoiser(ctx.config);
            if (static_cast<Eigen::Index>(obj.parts.size()) > model.identities.slots())
                throw InputError("object has more parts than identity slots");
            SemanticInputs old_in = ed.sem;
            old_in.phrases = ed.old_phrases;
            const auto old_sem = build_semantics(old_in, static_cast<int>(obj.parts.size()), emb, ctx.config, manifest);
            std::vector<std::string> phrases;
            if (!ed.sem.phrases.empty()) {
                phrases = read_phrases(ed.sem.phrases);
                manifest.add_input(ed.sem.phrases);
            }
            const LocalTokens new_local = encode_local(phrases, ctx.config.local_tokens, emb);
            std::string bytes;
            if (!ctx.manifest_only) {
                const auto res = edit_part(obj, ed.target, new_local, old_sem, model,
                                           {ctx.config.edit_tau(), ctx.config.edit.k_sync});
                manifest.extra["inversion_max_residual"] = res.inversion.max_residual;
                manifest.extra["inversion_unconverged_steps"] = res.inversion.unconverged_steps;
                bytes = encode_pltf(res.object);
            }
            emit(ctx, manifest, ed.out, bytes);
            finish(ctx, manifest, manifest_path_for(ed.out));
        };
    });

    // scene ----------------------------------------------------------------
    struct {
        std::vector<std::string> objects, names;
        std::string triplets, out_dir = "scene_refined", embedder;
        std::optional<int> k_refine;
    } sc;
    auto* c_sc = app.add_subcommand("scene", "Jointly refine several sampled objects");
    c_sc->add_option("--objects", sc.objects, "Object PLTF files")->required();
    c_sc->add_option("--scene-triplets", sc.triplets, "Triplets between objects (i, j = object index)");
    c_sc->add_option("--names", sc.names, "Object names, one per object");
    c_sc->add_option("--k-refine", sc.k_refine, "Refinement passes");
    c_sc->add_option("--embedder", sc.embedder, "Text embedder: hash or file:<path>");
    c_sc->add_option("--out-dir", sc.out_dir, "Directory for refined PLTF files")->capture_default_str();
    c_sc->callback([&] {
        action = [&] {
            if (sc.k_refine) ctx.config.k_refine = *sc.k_refine;
            apply_embedder_flag(ctx.config, sc.embedder);
            validate_config(ctx.config);
            if (!sc.names.empty() && sc.names.size() != sc.objects.size())
                throw InputError("--names needs one name per object");
            if (static_cast<int>(sc.objects.size()) > ctx.config.identity_slots)
                throw InputError("more objects than identity slots");
            std::vector<ObjectLatents> objects;
            for (const auto& p : sc.objects) {
                manifest.add_input(p);
                objects.push_back(read_pltf(p));
            }
            std::vector<RelationalTriplet> triplets;
            if (!sc.triplets.empty()) {
                manifest.add_input(sc.triplets);
                triplets = triplets_for(sc.triplets, "");
            }
            std::vector<std::string> names = sc.names;
            if (names.empty())
                for (const auto& p : sc.objects) names.push_back(pltf_path_stem(p));
            const Embedder emb = make_embedder(ctx.config);
            const CoDenoiser model = make_codenoiser(ctx.config);
            if (!ctx.manifest_only) fs::create_directories(sc.out_dir);
            std::vector<ObjectLatents> refined;
            if (!ctx.manifest_only) refined = scene_refine(objects, triplets, names, emb, model, ctx.config.k_refine);
            for (std::size_t k = 0; k < sc.objects.size(); ++k) {
                const fs::path path = fs::path(sc.out_dir) / ("object_" + std::to_string(k) + ".pltf");
                emit(ctx, manifest, path, ctx.manifest_only ? std::string() : encode_pltf(refined[k]));
            }
            if (ctx.manifest_only) fs::create_directories(sc.out_dir);
            finish(ctx, manifest, fs::path(sc.out_dir) / "manifest.json");
        };
    });

    // metrics --------------------------------------------------------------
    struct {
        std::string pred, gt, report, pred_parts;
        std::optional<double> tau;
    } met;
    auto* c_met = app.add_subcommand("metrics", "Chamfer, EMD, F-score and pairwise part IoU");
    c_met->add_option("--pred", met.pred, "Predicted point cloud (XYZ or PLY)")->required();
    c_met->add_option("--gt", met.gt, "Reference point cloud (XYZ or PLY)")->required();
    c_met->add_option("--pred-parts", met.pred_parts, "Part id per predicted point (enables pairwise IoU)");
    c_met->add_option("--tau", met.tau, "F-score threshold");
    c_met->add_option("--report", met.report, "Report to write (JSON)")->required();
    c_met->callback([&] {
        action = [&] {
            if (met.tau) ctx.config.metrics.fscore_tau = *met.tau;
            validate_config(ctx.config);
            manifest.add_input(met.pred);
            manifest.add_input(met.gt);
            const PointCloud pred = read_point_cloud(met.pred);
            const PointCloud gt = read_point_cloud(met.gt);
            pred.validate("prediction");
            gt.validate("reference");
            nlohmann::ordered_json report;
            report["points"] = {{"pred", pred.size()}, {"gt", gt.size()}};
            report["chamfer"] = chamfer(pred, gt, ctx.config.metrics.chamfer);
            report["chamfer_form"] = ctx.config.metrics.chamfer == ChamferForm::Squared ? "squared" : "euclidean";
            const auto e = emd(pred, gt);
            report["emd"] = {{"value", e.value},
                             {"mode", e.mode == EmdMode::Exact ? "exact" : "entropic"},
                             {"duality_gap", e.duality_gap}};
            const auto f = fscore(pred, gt, ctx.config.metrics.fscore_tau);
            report["fscore"] = {{"tau", ctx.config.metrics.fscore_tau},
                                {"precision", f.precision},
                                {"recall", f.recall},
                                {"fscore", f.fscore}};
            if (!met.pred_parts.empty()) {
                manifest.add_input(met.pred_parts);
                const auto parts = split_by_part(pred, read_part_indices(met.pred_parts));
                std::vector<VoxelGrid> grids;
                std::size_t dropped = 0;
                for (const auto& [id, cloud] : parts) {
                    auto v = voxelize(cloud, ctx.config.metrics.frame, ctx.config.metrics.voxel_resolution);
                    dropped += v.dropped;
                    grids.push_back(std::move(v.grid));
                }
                report["pairwise_iou"] = {{"value", pairwise_iou(grids)},
                                          {"parts", grids.size()},
                                          {"resolution", ctx.config.metrics.voxel_resolution},
                                          {"dropped_points", dropped}};
            } else {
                report["pairwise_iou"] = nullptr;
            }
            emit(ctx, manifest, met.report, report.dump(2) + "\n");
            finish(ctx, manifest, manifest_path_for(met.report));
        };
    });

    // articulate -----------------------------------------------------------
    struct {
        std::string pose_a, pose_b, parts, out;
        double s = 1.0;
    } art;
    auto* c_art = app.add_subcommand("articulate", "Fit per-part rigid motion between two poses");
    c_art->add_option("--pose-a", art.pose_a, "Source pose point cloud")->required();
    c_art->add_option("--pose-b", art.pose_b, "Target pose point cloud (same point order)")->required();
    c_art->add_option("--parts", art.parts, "Part id per point")->required();
    c_art->add_option("--s", art.s, "Interpolation parameter in [0, 1]");
    c_art->add_option("--out", art.out, "Reassembled point cloud (XYZ)")->required();
    c_art->callback([&] {
        action = [&] {
            validate_config(ctx.config);
            manifest.add_input(art.pose_a);
            manifest.add_input(art.pose_b);
            manifest.add_input(art.parts);
            const PointCloud a = read_point_cloud(art.pose_a);
            const PointCloud b = read_point_cloud(art.pose_b);
            const auto ids = read_part_indices(art.parts);
            if (a.size() != b.size()) throw InputError("poses have different point counts");
            const auto parts_a = split_by_part(a, ids);
            const auto parts_b = split_by_part(b, ids);
            std::map<int, RigidTransform> transforms;
            nlohmann::ordered_json fits = nlohmann::ordered_json::object();
            for (const auto& [id, cloud] : parts_a) {
                const auto fit = fit_rigid(cloud, parts_b.at(id));
                transforms[id] = fit.transform;
                auto j = transform_json(fit.transform);
                j["rms_residual"] = fit.rms_residual;
                fits[std::to_string(id)] = j;
            }
            manifest.extra["transforms"] = fits;
            manifest.extra["s"] = art.s;
            emit(ctx, manifest, art.out, format_xyz(reassemble(parts_a, transforms, art.s)));
            finish(ctx, manifest, manifest_path_for(art.out));
        };
    });

    // stats ----------------------------------------------------------------
    struct {
        std::string parts, triplets, objects, out;
        std::optional<int> min_count;
        std::vector<std::string> holdout;
    } st;
    auto* c_st = app.add_subcommand("stats", "Corpus statistics and out-of-distribution splits");
    c_st->add_option("--parts", st.parts, "Parts file")->required();
    c_st->add_option("--triplets", st.triplets, "Triplet file")->required();
    c_st->add_option("--objects", st.objects, "Object table: id, category, split (TSV)");
    c_st->add_option("--min-count", st.min_count, "Minimum label frequency for the rare-label tail");
    c_st->add_option("--holdout", st.holdout, "Predicates held out for the relational OOD split");
    c_st->add_option("--out", st.out, "Report to write (JSON)")->required();
    c_st->callback([&] {
        action = [&] {
            if (st.min_count) ctx.config.ood_min_count = *st.min_count;
            validate_config(ctx.config);
            manifest.add_input(st.parts);
            manifest.add_input(st.triplets);
            const auto parts = read_parts(st.parts);
            std::map<std::string, CorpusObject> corpus;
            for (const auto& [id, vocab] : parts) corpus[id] = {id, "", "train", vocab, {}};
            for (auto& r : read_triplets(st.triplets)) {
                auto it = corpus.find(r.object_id);
                if (it == corpus.end()) throw InputError("triplets for unknown object '" + r.object_id + "'");
                it->second.triplets.push_back(std::move(r.triplet));
            }
            if (!st.objects.empty()) {
                manifest.add_input(st.objects);
                const auto lines = read_lines(st.objects);
                for (std::size_t n = 0; n < lines.size(); ++n) {
                    const auto t = trim(lines[n]);
                    if (t.empty() || t.front() == '#') continue;
                    const auto f = split(lines[n], '\t');
                    if (f.size() != 3)
                        throw InputError(st.objects + ":" + std::to_string(n + 1) + ": expected id, category, split");
                    auto it = corpus.find(f[0]);
                    if (it == corpus.end()) throw InputError("object table names unknown object '" + f[0] + "'");
                    it->second.category = f[1];
                    it->second.split = f[2];
                }
            }
            std::set<PredicateId> holdout;
            for (const auto& name : st.holdout) holdout.insert(parse_predicate(name).id());
            std::vector<CorpusObject> list;
            for (auto& [id, obj] : corpus) list.push_back(std::move(obj));
            nlohmann::ordered_json report;
            report["stats"] = dataset_stats(list).to_json();
            report["ood"] = ood_splits(list, ctx.config.ood_min_count, holdout).to_json();
            emit(ctx, manifest, st.out, report.dump(2) + "\n");
            finish(ctx, manifest, manifest_path_for(st.out));
        };
    });

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        if (std::find(args.begin(), args.end(), "--version") != args.end()) {
            out << "partlat " << kToolVersion << "\n";
            return kExitOk;
        }
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        if (!config_path.empty()) {
            ctx.config = load_config(config_path);
        }
        const auto* sub = app.get_subcommands().front();
        manifest.command = sub->get_name();
        const auto pos = std::find(args.begin(), args.end(), manifest.command);
        manifest.args.assign(pos + 1, args.end());
        action();
        return kExitOk;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const Error& e) {
        err << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const nlohmann::json::exception& e) {
        err << "input error: " << e.what() << "\n";
        return kExitInput;
    }
}

}  // namespace partlat
