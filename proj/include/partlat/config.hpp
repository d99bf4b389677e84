// Copyright (C) 2026 The partlat Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <sstream>
#include <type_traits>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "partlat/binary_io.hpp"
#include "partlat/codenoise.hpp"
#include "partlat/metrics.hpp"
#include "partlat/relations.hpp"
#include "partlat/rng.hpp"
#include "partlat/schedule.hpp"

namespace partlat {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kDefaultLocalTokens = 16;  // K_m
inline constexpr int kDefaultSteps = 50;
inline constexpr int kDefaultKSync = 2;
inline constexpr int kDefaultKRefine = 2;

using ojson = nlohmann::ordered_json;

struct RunConfig {
    std::uint64_t seed = 0;

    struct Schedule {
        ScheduleKind kind = ScheduleKind::CosineVp;
        int steps = kDefaultSteps;
    } schedule;

    LatentDims dims;
    int local_tokens = kDefaultLocalTokens;
    int identity_slots = 64;
    double identity_scale = 0.0;  // <= 0 selects 1/sqrt(d)

    struct Sync {
        bool enabled = true;
        bool accumulate_planner = true;
        std::string init = "random";  // random | identity
        double attention_scale = 0.0;  // <= 0 selects 1/sqrt(d)
        double alpha_3d = 1.0, alpha_2d = 1.0, lambda_3d = 1.0, lambda_2d = 1.0, beta_3d = 1.0, beta_2d = 1.0,
               eta = 1.0;
    } sync;

    struct DenoiserCfg {
        std::string kind = "analytic";  // analytic | mlp
        double mean = 0.0;
        double stddev = 1.0;
        int hidden = 64;
    } denoiser;

    struct EmbedderCfg {
        std::string mode = "hash";  // hash | file
        int d_text = 64;
        std::string file;
    } embedder;

    struct Edit {
        std::optional<int> tau;  // unset: T/2
        int k_sync = kDefaultKSync;
    } edit;

    int k_refine = kDefaultKRefine;
    InversionOptions inversion;

    double predicate_floor = kPredicateSimilarityFloor;
    ValidationThresholds thresholds;
    int ood_min_count = kDefaultOodMinCount;

    struct Metrics {
        int voxel_resolution = kDefaultVoxelResolution;
        double fscore_tau = kDefaultFscoreThreshold;
        ChamferForm chamfer = ChamferForm::Squared;
        VoxelFrame frame;
    } metrics;

    int edit_tau() const { return edit.tau.value_or(schedule.steps / 2); }
};

// ---------------------------------------------------------------------------
// Validation

inline void validate_config(const RunConfig& c) {
    auto fail = [](const std::string& field, const std::string& msg) { throw InputError("config field '" + field + "': " + msg); };
    if (c.schedule.steps < 2) fail("schedule.steps", "must be at least 2");
    if (c.dims.d < 1) fail("latent.d", "must be at least 1");
    if (c.dims.geo_tokens < 1) fail("latent.geo_tokens", "must be at least 1");
    if (c.dims.app_tokens < 1) fail("latent.app_tokens", "must be at least 1");
    if (c.local_tokens < 1) fail("local_tokens", "K_m must be at least 1");
    if (c.identity_slots < 1) fail("identity_slots", "must be at least 1");
    if (c.sync.init != "random" && c.sync.init != "identity") fail("sync.init", "expected 'random' or 'identity'");
    for (auto [name, v] : {std::pair{"alpha_3d", c.sync.alpha_3d}, {"alpha_2d", c.sync.alpha_2d},
                           {"lambda_3d", c.sync.lambda_3d}, {"lambda_2d", c.sync.lambda_2d},
                           {"beta_3d", c.sync.beta_3d}, {"beta_2d", c.sync.beta_2d}, {"eta", c.sync.eta}})
        if (!std::isfinite(v)) fail(std::string("sync.") + name, "must be finite");
    if (c.denoiser.kind != "analytic" && c.denoiser.kind != "mlp") fail("denoiser.kind", "expected 'analytic' or 'mlp'");
    if (!(c.denoiser.stddev > 0.0)) fail("denoiser.stddev", "must be positive");
    if (c.denoiser.hidden < 1) fail("denoiser.hidden", "must be at least 1");
    if (c.embedder.mode != "hash" && c.embedder.mode != "file") fail("embedder.mode", "expected 'hash' or 'file'");
    if (c.embedder.d_text < 1) fail("embedder.d_text", "must be at least 1");
    if (c.embedder.mode == "file") {
        if (c.embedder.file.empty()) fail("embedder.file", "required when embedder.mode is 'file'");
        if (!std::filesystem::exists(c.embedder.file)) fail("embedder.file", "no such file: " + c.embedder.file);
    }
    if (c.edit.tau && (*c.edit.tau < 0 || *c.edit.tau > c.schedule.steps)) fail("edit.tau", "must lie in [0, T]");
    if (c.edit.k_sync < 0) fail("edit.k_sync", "must be non-negative");
    if (c.k_refine < 0) fail("k_refine", "must be non-negative");
    if (c.inversion.max_iterations < 1) fail("inversion.max_iterations", "must be at least 1");
    if (!(c.inversion.tolerance > 0.0)) fail("inversion.tolerance", "must be positive");
    if (c.inversion.patience < 1) fail("inversion.patience", "must be at least 1");
    if (!(c.predicate_floor >= -1.0 && c.predicate_floor <= 1.0)) fail("predicate_floor", "must lie in [-1, 1]");
    try {
        c.thresholds.validate();
    } catch (const InputError& e) {
        fail("thresholds", e.what());
    }
    if (c.ood_min_count < 1) fail("ood_min_count", "must be at least 1");
    if (c.metrics.voxel_resolution < 2) fail("metrics.voxel_resolution", "must be at least 2");
    if (!(c.metrics.fscore_tau > 0.0)) fail("metrics.fscore_tau", "must be positive");
    try {
        c.metrics.frame.validate();
    } catch (const InputError&) {
        fail("metrics.frame", "min must be below max on every axis");
    }
}

// ---------------------------------------------------------------------------
// JSON mapping

inline ojson config_to_json(const RunConfig& c) {
    auto vec3 = [](const Point3& p) { return ojson::array({p.x(), p.y(), p.z()}); };
    ojson j;
    j["seed"] = c.seed;
    j["schedule"] = {{"kind", std::string(to_string(c.schedule.kind))}, {"steps", c.schedule.steps}};
    j["latent"] = {{"d", c.dims.d}, {"geo_tokens", c.dims.geo_tokens}, {"app_tokens", c.dims.app_tokens}};
    j["local_tokens"] = c.local_tokens;
    j["identity_slots"] = c.identity_slots;
    j["identity_scale"] = c.identity_scale;
    j["sync"] = {{"enabled", c.sync.enabled},
                 {"accumulate_planner", c.sync.accumulate_planner},
                 {"init", c.sync.init},
                 {"attention_scale", c.sync.attention_scale},
                 {"alpha_3d", c.sync.alpha_3d},
                 {"alpha_2d", c.sync.alpha_2d},
                 {"lambda_3d", c.sync.lambda_3d},
                 {"lambda_2d", c.sync.lambda_2d},
                 {"beta_3d", c.sync.beta_3d},
                 {"beta_2d", c.sync.beta_2d},
                 {"eta", c.sync.eta}};
    j["denoiser"] = {{"kind", c.denoiser.kind},
                     {"mean", c.denoiser.mean},
                     {"stddev", c.denoiser.stddev},
                     {"hidden", c.denoiser.hidden}};
    j["embedder"] = {{"mode", c.embedder.mode}, {"d_text", c.embedder.d_text}, {"file", c.embedder.file}};
    j["edit"] = {{"tau", c.edit.tau ? ojson(*c.edit.tau) : ojson(nullptr)}, {"k_sync", c.edit.k_sync}};
    j["k_refine"] = c.k_refine;
    j["inversion"] = {{"max_iterations", c.inversion.max_iterations}, {"tolerance", c.inversion.tolerance},
                        {"patience", c.inversion.patience}};
    j["predicate_floor"] = c.predicate_floor;
    j["thresholds"] = {{"eps_rel", c.thresholds.eps_rel},
                       {"tau_gap", c.thresholds.tau_gap},
                       {"theta_in", c.thresholds.theta_in},
                       {"theta_sym", c.thresholds.theta_sym}};
    j["ood_min_count"] = c.ood_min_count;
    j["metrics"] = {{"voxel_resolution", c.metrics.voxel_resolution},
                    {"fscore_tau", c.metrics.fscore_tau},
                    {"chamfer", c.metrics.chamfer == ChamferForm::Squared ? "squared" : "euclidean"},
                    {"frame_min", vec3(c.metrics.frame.min)},
                    {"frame_max", vec3(c.metrics.frame.max)}};
    return j;
}

namespace detail {

// Reads the keys of one JSON object, rejecting any key it was not asked for.
class FieldReader {
public:
    FieldReader(const ojson& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail("", "expected an object");
    }

    [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
        throw InputError("config field '" + full(key) + "': " + msg);
    }

    std::string full(const std::string& key) const {
        if (path_.empty()) return key.empty() ? "<root>" : key;
        return key.empty() ? path_ : path_ + "." + key;
    }

    const ojson* find(const std::string& key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void number(const std::string& key, double& dst) {
        if (const auto* v = find(key)) {
            if (!v->is_number()) fail(key, "expected a number");
            dst = v->get<double>();
        }
    }
    template <class Int>
    void integer(const std::string& key, Int& dst) {
        if (const auto* v = find(key)) {
            if (!v->is_number_integer()) fail(key, "expected an integer");
            if constexpr (std::is_unsigned_v<Int>) {
                if (!v->is_number_unsigned()) fail(key, "expected a non-negative integer");
                dst = v->get<Int>();
            } else {
                const auto x = v->get<std::int64_t>();
                if (x < std::numeric_limits<Int>::min() || x > std::numeric_limits<Int>::max())
                    fail(key, "integer out of range");
                dst = static_cast<Int>(x);
            }
        }
    }
    void boolean(const std::string& key, bool& dst) {
        if (const auto* v = find(key)) {
            if (!v->is_boolean()) fail(key, "expected true or false");
            dst = v->get<bool>();
        }
    }
    void string(const std::string& key, std::string& dst) {
        if (const auto* v = find(key)) {
            if (!v->is_string()) fail(key, "expected a string");
            dst = v->get<std::string>();
        }
    }
    void point(const std::string& key, Point3& dst) {
        if (const auto* v = find(key)) {
            if (!v->is_array() || v->size() != 3) fail(key, "expected an array of 3 numbers");
            for (int a = 0; a < 3; ++a) {
                if (!(*v)[static_cast<std::size_t>(a)].is_number()) fail(key, "expected an array of 3 numbers");
                dst(a) = (*v)[static_cast<std::size_t>(a)].get<double>();
            }
        }
    }
    std::optional<FieldReader> object(const std::string& key) {
        if (const auto* v = find(key)) {
            if (!v->is_object()) fail(key, "expected an object");
            return FieldReader(*v, full(key));
        }
        return std::nullopt;
    }

    void finish() const {
        for (const auto& [key, value] : j_.items())
            if (!seen_.contains(key)) fail(key, "unknown key");
    }

private:
    const ojson& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline std::string line_column(std::string_view text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t k = 0; k < std::min(byte, text.size()); ++k) {
        if (text[k] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace detail

/// Fills a config from JSON. Omitted fields keep their defaults; unknown keys
/// and ill-typed values are rejected with the field path in the message.
inline RunConfig config_from_json(const ojson& j) {
    RunConfig c;
    detail::FieldReader root(j, "");
    root.integer("seed", c.seed);
    if (auto r = root.object("schedule")) {
        std::string kind(to_string(c.schedule.kind));
        r->string("kind", kind);
        try {
            c.schedule.kind = parse_schedule_kind(kind);
        } catch (const Error&) {
            r->fail("kind", "expected 'linear' or 'cosine'");
        }
        r->integer("steps", c.schedule.steps);
        r->finish();
    }
    if (auto r = root.object("latent")) {
        r->integer("d", c.dims.d);
        r->integer("geo_tokens", c.dims.geo_tokens);
        r->integer("app_tokens", c.dims.app_tokens);
        r->finish();
    }
    root.integer("local_tokens", c.local_tokens);
    root.integer("identity_slots", c.identity_slots);
    root.number("identity_scale", c.identity_scale);
    if (auto r = root.object("sync")) {
        r->boolean("enabled", c.sync.enabled);
        r->boolean("accumulate_planner", c.sync.accumulate_planner);
        r->string("init", c.sync.init);
        r->number("attention_scale", c.sync.attention_scale);
        r->number("alpha_3d", c.sync.alpha_3d);
        r->number("alpha_2d", c.sync.alpha_2d);
        r->number("lambda_3d", c.sync.lambda_3d);
        r->number("lambda_2d", c.sync.lambda_2d);
        r->number("beta_3d", c.sync.beta_3d);
        r->number("beta_2d", c.sync.beta_2d);
        r->number("eta", c.sync.eta);
        r->finish();
    }
    if (auto r = root.object("denoiser")) {
        r->string("kind", c.denoiser.kind);
        r->number("mean", c.denoiser.mean);
        r->number("stddev", c.denoiser.stddev);
        r->integer("hidden", c.denoiser.hidden);
        r->finish();
    }
    if (auto r = root.object("embedder")) {
        r->string("mode", c.embedder.mode);
        r->integer("d_text", c.embedder.d_text);
        r->string("file", c.embedder.file);
        r->finish();
    }
    if (auto r = root.object("edit")) {
        if (const auto* v = r->find("tau"); v && !v->is_null()) {
            int tau = 0;
            if (!v->is_number_integer()) r->fail("tau", "expected an integer or null");
            tau = v->get<int>();
            c.edit.tau = tau;
        }
        r->integer("k_sync", c.edit.k_sync);
        r->finish();
    }
    root.integer("k_refine", c.k_refine);
    if (auto r = root.object("inversion")) {
        r->integer("max_iterations", c.inversion.max_iterations);
        r->number("tolerance", c.inversion.tolerance);
        r->integer("patience", c.inversion.patience);
        r->finish();
    }
    root.number("predicate_floor", c.predicate_floor);
    if (auto r = root.object("thresholds")) {
        r->number("eps_rel", c.thresholds.eps_rel);
        r->number("tau_gap", c.thresholds.tau_gap);
        r->number("theta_in", c.thresholds.theta_in);
        r->number("theta_sym", c.thresholds.theta_sym);
        r->finish();
    }
    root.integer("ood_min_count", c.ood_min_count);
    if (auto r = root.object("metrics")) {
        r->integer("voxel_resolution", c.metrics.voxel_resolution);
        r->number("fscore_tau", c.metrics.fscore_tau);
        std::string form = c.metrics.chamfer == ChamferForm::Squared ? "squared" : "euclidean";
        r->string("chamfer", form);
        if (form == "squared") c.metrics.chamfer = ChamferForm::Squared;
        else if (form == "euclidean") c.metrics.chamfer = ChamferForm::Euclidean;
        else r->fail("chamfer", "expected 'squared' or 'euclidean'");
        r->point("frame_min", c.metrics.frame.min);
        r->point("frame_max", c.metrics.frame.max);
        r->finish();
    }
    root.finish();
    validate_config(c);
    return c;
}

inline RunConfig parse_config(std::string_view text, const std::string& source = "config") {
    if (trim(text).empty()) {
        RunConfig c;
        validate_config(c);
        return c;
    }
    ojson j;
    try {
        j = ojson::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(source + ": JSON syntax error at " + detail::line_column(text, e.byte ? e.byte - 1 : 0));
    }
    try {
        return config_from_json(j);
    } catch (const InputError& e) {
        throw InputError(source + ": " + e.what());
    }
}

inline RunConfig load_config(const std::filesystem::path& path) {
    return parse_config(read_file_bytes(path), path.string());
}

inline std::string format_config(const RunConfig& c) { return config_to_json(c).dump(2) + "\n"; }

inline void save_config(const std::filesystem::path& path, const RunConfig& c) {
    write_file_atomic(path, format_config(c));
}

/// Documented defaults, one row per setting that comes from the method
/// description rather than from engineering choice.
struct DefaultEntry {
    std::string key;
    std::string value;
};

inline std::vector<DefaultEntry> method_defaults() {
    const RunConfig c;
    auto num = [](double v) {
        std::ostringstream s;
        s << v;
        return s.str();
    };
    return {{"local_tokens", std::to_string(c.local_tokens)},
            {"metrics.voxel_resolution", std::to_string(c.metrics.voxel_resolution)},
            {"metrics.fscore_tau", num(c.metrics.fscore_tau)},
            {"ood_min_count", std::to_string(c.ood_min_count)},
            {"schedule.steps", std::to_string(c.schedule.steps)},
            {"edit.k_sync", std::to_string(c.edit.k_sync)},
            {"k_refine", std::to_string(c.k_refine)}};
}

// ---------------------------------------------------------------------------
// Model assembly

inline Embedder make_embedder(const RunConfig& c) {
    const auto seed = substream_seed(c.seed, "embedder");
    if (c.embedder.mode == "file") return Embedder::from_file(c.embedder.file, c.dims.d, seed);
    return Embedder::hash(c.embedder.d_text, c.dims.d, seed);
}

inline CoDenoiser make_codenoiser(const RunConfig& c) {
    CoDenoiser m;
    m.schedule = make_schedule(c.schedule.steps, c.schedule.kind);
    m.sync = c.sync.init == "identity" ? SyncCoefficients::identity(c.dims.d)
                                       : SyncCoefficients::random(c.dims.d, substream_seed(c.seed, "sync"),
                                                                  c.sync.attention_scale);
    m.sync.alpha_3d = c.sync.alpha_3d;
    m.sync.alpha_2d = c.sync.alpha_2d;
    m.sync.lambda_3d = c.sync.lambda_3d;
    m.sync.lambda_2d = c.sync.lambda_2d;
    m.sync.beta_3d = c.sync.beta_3d;
    m.sync.beta_2d = c.sync.beta_2d;
    m.sync.eta = c.sync.eta;
    m.sync_enabled = c.sync.enabled;
    m.accumulate_planner = c.sync.accumulate_planner;
    m.denoisers = c.denoiser.kind == "mlp"
                      ? DenoiserSet::reference_mlp(c.dims.d, c.denoiser.hidden, substream_seed(c.seed, "denoiser"))
                      : DenoiserSet::analytic(c.denoiser.mean, c.denoiser.stddev);
    m.identities = IdentityTable::random(c.identity_slots, c.dims.d, substream_seed(c.seed, "identity"),
                                         c.identity_scale);
    m.inversion = c.inversion;
    return m;
}

// ---------------------------------------------------------------------------
// Run manifests

inline std::string hash_hex(std::string_view bytes) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

/// Record of one run: tool version, arguments, effective configuration and
/// content hashes of every input and output. Contains no timestamps, so
/// identical runs produce identical manifests.
struct Manifest {
    std::string command;
    std::vector<std::string> args;  // arguments after the subcommand
    RunConfig config;
    std::vector<std::pair<std::string, std::string>> inputs;   // path, fnv1a64 hex
    std::vector<std::pair<std::string, std::string>> outputs;  // path, fnv1a64 hex
    ojson extra = ojson::object();

    void add_input(const std::filesystem::path& p) { inputs.emplace_back(p.string(), hash_hex(read_file_bytes(p))); }
    void add_output(const std::filesystem::path& p, std::string_view bytes) {
        outputs.emplace_back(p.string(), hash_hex(bytes));
    }

    ojson to_json() const {
        ojson j;
        j["tool"] = "partlat";
        j["version"] = kToolVersion;
        j["command"] = command;
        j["args"] = args;
        j["config"] = config_to_json(config);
        auto pairs = [](const auto& v) {
            ojson a = ojson::array();
            for (const auto& [path, hash] : v) a.push_back({{"path", path}, {"fnv1a64", hash}});
            return a;
        };
        j["inputs"] = pairs(inputs);
        j["outputs"] = pairs(outputs);
        if (!extra.empty()) j["details"] = extra;
        return j;
    }
};

}  // namespace partlat
