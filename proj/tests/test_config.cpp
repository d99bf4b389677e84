// Copyright (C) 2026 The partlat Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <map>

#include "partlat/config.hpp"
#include "test_util.hpp"

using namespace partlat;

namespace {

std::string error_of(std::string_view text) {
    try {
        parse_config(text, "cfg.json");
    } catch (const InputError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(Config, EmptyTextGivesDefaults) {
    const auto c = parse_config("  \n");
    EXPECT_EQ(format_config(c), format_config(RunConfig{}));
    EXPECT_EQ(c.local_tokens, 16);
    EXPECT_EQ(c.schedule.steps, 50);
    EXPECT_EQ(c.schedule.kind, ScheduleKind::CosineVp);
}

TEST(Config, PartialObjectKeepsOtherDefaults) {
    const auto c = parse_config(R"({"seed": 9, "schedule": {"steps": 12}, "sync": {"eta": 0.25}})");
    EXPECT_EQ(c.seed, 9U);
    EXPECT_EQ(c.schedule.steps, 12);
    EXPECT_EQ(c.sync.eta, 0.25);
    EXPECT_EQ(c.sync.alpha_3d, 1.0);
    EXPECT_EQ(c.edit_tau(), 6);
}

TEST(Config, ErrorsNameTheField) {
    EXPECT_NE(error_of(R"({"local_tokens": 0})").find("'local_tokens'"), std::string::npos);
    EXPECT_NE(error_of(R"({"sync": {"gamma": 1}})").find("'sync.gamma': unknown key"), std::string::npos);
    EXPECT_NE(error_of(R"({"schedule": {"steps": "ten"}})").find("'schedule.steps'"), std::string::npos);
    EXPECT_NE(error_of(R"({"schedule": {"steps": 1}})").find("'schedule.steps'"), std::string::npos);
    EXPECT_NE(error_of(R"({"schedule": {"kind": "sigmoid"}})").find("'schedule.kind'"), std::string::npos);
    EXPECT_NE(error_of(R"({"metrics": {"frame_min": [0, 0]}})").find("'metrics.frame_min'"), std::string::npos);
    EXPECT_NE(error_of(R"({"edit": {"tau": 51}})").find("'edit.tau'"), std::string::npos);
    EXPECT_NE(error_of(R"({"seed": -1})").find("'seed'"), std::string::npos);
    EXPECT_NE(error_of(R"({"inversion": {"patience": 0}})").find("'inversion.patience'"), std::string::npos);
    EXPECT_NE(error_of("[1, 2]").find("'<root>'"), std::string::npos);
}

TEST(Config, SyntaxErrorReportsLineAndColumn) {
    const auto msg = error_of("{\n  \"seed\": 1,\n  \"k_refine\": ?\n}");
    EXPECT_NE(msg.find("cfg.json"), std::string::npos);
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
}

TEST(Config, SaveLoadRoundTrip) {
    RunConfig c;
    c.seed = 1234567890123ULL;
    c.schedule = {ScheduleKind::LinearVp, 17};
    c.dims = {8, 4, 6};
    c.sync.lambda_2d = 0.125;
    c.sync.init = "identity";
    c.denoiser.kind = "mlp";
    c.edit.tau = 3;
    c.metrics.chamfer = ChamferForm::Euclidean;
    c.metrics.frame.min = Point3(-2, -3, -4);
    c.thresholds.eps_rel = 0.1;
    const auto dir = partlat::testing::scratch_dir("config_rt");
    save_config(dir / "c.json", c);
    const auto back = load_config(dir / "c.json");
    EXPECT_EQ(format_config(back), format_config(c));
    EXPECT_EQ(back.edit_tau(), 3);
    EXPECT_EQ(back.dims.geo_tokens, 4);
    EXPECT_EQ(back.metrics.frame.min, Point3(-2, -3, -4));
    EXPECT_THROW(load_config(dir / "missing.json"), InputError);
}

TEST(Config, MethodDefaultsTable) {
    std::map<std::string, std::string> table;
    for (const auto& e : method_defaults()) table[e.key] = e.value;
    EXPECT_EQ(table.at("local_tokens"), "16");
    EXPECT_EQ(table.at("metrics.voxel_resolution"), "64");
    EXPECT_EQ(table.at("metrics.fscore_tau"), "0.005");
    EXPECT_EQ(table.at("ood_min_count"), "2");
    const RunConfig c;
    EXPECT_EQ(c.metrics.fscore_tau, 0.005);
    EXPECT_EQ(c.metrics.voxel_resolution, 64);
    EXPECT_EQ(c.ood_min_count, 2);
}

TEST(Config, EditTauDefaultsToHalfTheSteps) {
    RunConfig c;
    EXPECT_EQ(c.edit_tau(), 25);
    c.schedule.steps = 7;
    EXPECT_EQ(c.edit_tau(), 3);
}

TEST(Config, MakeCodenoiserIsDeterministicPerSeed) {
    RunConfig c;
    c.dims = {6, 2, 3};
    const auto a = make_codenoiser(c), b = make_codenoiser(c);
    EXPECT_EQ(a.sync.sites.planner.w_q, b.sync.sites.planner.w_q);
    EXPECT_EQ(a.identities.row(3), b.identities.row(3));
    c.seed = 1;
    EXPECT_NE(make_codenoiser(c).sync.sites.planner.w_q, a.sync.sites.planner.w_q);
    c.sync.eta = 0.5;
    c.sync.enabled = false;
    const auto m = make_codenoiser(c);
    EXPECT_EQ(m.sync.eta, 0.5);
    EXPECT_FALSE(m.sync_enabled);
}

TEST(Config, FileEmbedderRequiresExistingFile) {
    RunConfig c;
    c.embedder.mode = "file";
    EXPECT_THROW(validate_config(c), InputError);
    c.embedder.file = "/nonexistent/vectors.txt";
    EXPECT_THROW(validate_config(c), InputError);
}
