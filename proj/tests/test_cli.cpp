// Copyright (C) 2026 The partlat Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "partlat/cli.hpp"
#include "test_util.hpp"

using namespace partlat;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = PARTLAT_FIXTURES;

struct RunResult {
    int code;
    std::string out, err;
};

RunResult run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_command(args, out, err);
    return {code, out.str(), err.str()};
}

std::string fixture(const std::string& name) { return (kFixtures / name).string(); }

std::string slurp(const fs::path& p) { return read_file_bytes(p); }

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
}

// Reduced widths and steps keep the end-to-end runs fast.
std::string small_config(const fs::path& dir) {
    const auto p = dir / "small.json";
    write_text(p, R"({"latent": {"d": 8, "geo_tokens": 8, "app_tokens": 16}, "schedule": {"steps": 10}})");
    return p.string();
}

// Runs `command args` again under the manifest's recorded configuration and
// returns the output hashes of the replay.
nlohmann::ordered_json replay(const fs::path& manifest_path, const fs::path& dir) {
    const auto m = nlohmann::ordered_json::parse(slurp(manifest_path));
    const auto cfg = dir / "replay_config.json";
    write_text(cfg, m["config"].dump(2));
    std::vector<std::string> args{"--config", cfg.string(), m["command"].get<std::string>()};
    for (const auto& a : m["args"]) args.push_back(a.get<std::string>());
    const auto r = run(args);
    EXPECT_EQ(r.code, 0) << r.err;
    return nlohmann::ordered_json::parse(slurp(manifest_path));
}

}  // namespace

TEST(Cli, VersionAndUsageExitCodes) {
    auto r = run({"--version"});
    EXPECT_EQ(r.code, kExitOk);
    EXPECT_EQ(r.out, std::string("partlat ") + kToolVersion + "\n");
    EXPECT_EQ(run({}).code, kExitUsage);
    EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
    EXPECT_EQ(run({"sample", "--out", "x.pltf"}).code, kExitUsage);
    const auto dir = partlat::testing::scratch_dir("cli_usage");
    r = run({"canonicalize", "--captions", fixture("captions.txt"), "--parts", fixture("parts.tsv"), "--out",
             (dir / "t.tsv").string(), "--embedder", "word2vec"});
    EXPECT_EQ(r.code, kExitUsage);
    EXPECT_NE(r.err.find("--embedder"), std::string::npos);
}

TEST(Cli, InputErrorsExitTwo) {
    const auto dir = partlat::testing::scratch_dir("cli_input");
    auto r = run({"canonicalize", "--captions", (dir / "missing.txt").string(), "--parts", fixture("parts.tsv"),
                  "--out", (dir / "t.tsv").string()});
    EXPECT_EQ(r.code, kExitInput);
    write_text(dir / "bad.json", R"({"sync": {"gamma": 2}})");
    r = run({"--config", (dir / "bad.json").string(), "metrics", "--pred", fixture("pred.xyz"), "--gt",
             fixture("gt.xyz"), "--report", (dir / "m.json").string()});
    EXPECT_EQ(r.code, kExitInput);
    EXPECT_NE(r.err.find("sync.gamma"), std::string::npos);
    EXPECT_FALSE(fs::exists(dir / "m.json"));
}

TEST(Cli, CollinearArticulationExitsThree) {
    const auto dir = partlat::testing::scratch_dir("cli_numeric");
    std::string line, ids;
    for (int k = 0; k < 5; ++k) {
        line += std::to_string(k) + " " + std::to_string(2 * k) + " 0\n";
        ids += "0\n";
    }
    write_text(dir / "a.xyz", line);
    write_text(dir / "ids.txt", ids);
    const auto r = run({"articulate", "--pose-a", (dir / "a.xyz").string(), "--pose-b", (dir / "a.xyz").string(),
                        "--parts", (dir / "ids.txt").string(), "--out", (dir / "out.xyz").string()});
    EXPECT_EQ(r.code, kExitNumeric);
}

TEST(Cli, BinaryReportsExitCodes) {
    const std::string cli = PARTLAT_CLI;
    EXPECT_EQ(std::system((cli + " --version > /dev/null").c_str()), 0);
    const int status = std::system((cli + " > /dev/null 2>&1").c_str());
    EXPECT_EQ(WEXITSTATUS(status), kExitUsage);
}

TEST(Cli, CanonicalizeFixture) {
    const auto dir = partlat::testing::scratch_dir("cli_canon");
    const auto out = dir / "t.tsv";
    const auto r = run({"canonicalize", "--captions", fixture("captions.txt"), "--parts", fixture("parts.tsv"),
                        "--out", out.string(), "--stats", (dir / "stats.json").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto records = read_triplets(out);
    int supports = 0, attached = 0;
    for (const auto& rec : records) {
        if (rec.object_id == "chair" && rec.triplet.predicate.id() == PredicateId::Support) ++supports;
        if (rec.object_id == "mug" && rec.triplet.predicate.id() == PredicateId::AttachedTo) ++attached;
    }
    EXPECT_EQ(supports, 3);
    EXPECT_GE(attached, 1);
    const auto m = nlohmann::ordered_json::parse(slurp(dir / "t.tsv.manifest.json"));
    EXPECT_EQ(m["command"], "canonicalize");
    EXPECT_EQ(m["outputs"][0]["fnv1a64"], hash_hex(slurp(out)));
    EXPECT_EQ(m["inputs"].size(), 2U);
}

TEST(Cli, ValidateFixture) {
    const auto dir = partlat::testing::scratch_dir("cli_validate");
    ASSERT_EQ(run({"canonicalize", "--captions", fixture("captions.txt"), "--parts", fixture("parts.tsv"), "--out",
                   (dir / "t.tsv").string()})
                  .code,
              0);
    const auto r = run({"validate", "--triplets", (dir / "t.tsv").string(), "--geometry", fixture("geometry.txt"),
                        "--out", (dir / "v.json").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto report = nlohmann::json::parse(slurp(dir / "v.json"));
    EXPECT_EQ(report["summary"]["violated"], 0);
    EXPECT_GT(report["summary"]["valid"].get<int>(), 0);
}

TEST(Cli, MetricsMatchGoldenReport) {
    const auto dir = partlat::testing::scratch_dir("cli_metrics");
    const auto report = dir / "m.json";
    const auto r = run({"metrics", "--pred", fixture("pred.xyz"), "--gt", fixture("gt.xyz"), "--pred-parts",
                        fixture("pred_parts.txt"), "--report", report.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto got = nlohmann::json::parse(slurp(report));
    const auto want = nlohmann::json::parse(slurp(kFixtures / "golden_metrics.json"));
    EXPECT_EQ(got["chamfer_form"], want["chamfer_form"]);
    EXPECT_EQ(got["emd"]["mode"], want["emd"]["mode"]);
    for (const auto* key : {"precision", "recall", "fscore"})
        EXPECT_NEAR(got["fscore"][key].get<double>(), want["fscore"][key].get<double>(), 1e-12);
    EXPECT_NEAR(got["chamfer"].get<double>(), want["chamfer"].get<double>(), 1e-15);
    EXPECT_NEAR(got["emd"]["value"].get<double>(), want["emd"]["value"].get<double>(), 1e-15);
    EXPECT_EQ(got["pairwise_iou"], want["pairwise_iou"]);
    // The golden value itself agrees with the brute-force oracle.
    const auto pred = read_point_cloud(fixture("pred.xyz")), gt = read_point_cloud(fixture("gt.xyz"));
    EXPECT_NEAR(want["chamfer"].get<double>(), oracle::brute_chamfer(pred.points, gt.points), 1e-15);
}

TEST(Cli, ManifestOnlyWritesNoOutputs) {
    const auto dir = partlat::testing::scratch_dir("cli_manifest_only");
    const auto report = dir / "m.json";
    const auto r = run({"--manifest-only", "metrics", "--pred", fixture("pred.xyz"), "--gt", fixture("gt.xyz"),
                        "--report", report.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_FALSE(fs::exists(report));
    EXPECT_EQ(slurp(dir / "m.json.manifest.json"), r.out);
    const auto m = nlohmann::ordered_json::parse(r.out);
    EXPECT_TRUE(m["outputs"].empty());
    EXPECT_EQ(m["details"]["dry_run"], true);
    EXPECT_EQ(m["command"], "metrics");
    EXPECT_EQ(m["inputs"].size(), 2U);
}

TEST(Cli, SampleEditSceneAreByteReproducibleAndReplay) {
    const auto dir = partlat::testing::scratch_dir("cli_e2e");
    const auto cfg = small_config(dir);
    const auto trip = (dir / "t.tsv").string();
    ASSERT_EQ(run({"canonicalize", "--captions", fixture("captions.txt"), "--parts", fixture("parts.tsv"), "--out",
                   trip})
                  .code,
              0);
    const auto a = (dir / "a.pltf").string(), b = (dir / "b.pltf").string();
    const std::vector<std::string> sample_a{"--config", cfg, "sample", "--parts", "5", "--part-names",
                                            fixture("parts.tsv"), "--object", "chair", "--triplets", trip,
                                            "--phrases", fixture("phrases.txt"), "--seed", "3", "--out", a};
    const std::vector<std::string> sample_b{"--config", cfg, "sample", "--parts", "2", "--part-names",
                                            fixture("parts.tsv"), "--object", "mug", "--triplets", trip,
                                            "--seed", "4", "--out", b};
    const std::vector<std::string> edit{"--config", cfg, "edit", "--in", a, "--target", "3", "--part-names",
                                        fixture("parts.tsv"), "--object", "chair", "--triplets", trip,
                                        "--old-phrases", fixture("phrases.txt"), "--phrases",
                                        fixture("phrases_edit.txt"), "--out", (dir / "e.pltf").string()};
    const std::vector<std::string> scene{"--config", cfg, "scene", "--objects", a, b, "--scene-triplets",
                                         fixture("scene_triplets.tsv"), "--out-dir", (dir / "scene").string()};
    const std::vector<std::pair<std::vector<std::string>, std::vector<fs::path>>> runs{
        {sample_a, {a, a + ".manifest.json"}},
        {sample_b, {b, b + ".manifest.json"}},
        {edit, {dir / "e.pltf", dir / "e.pltf.manifest.json"}},
        {scene, {dir / "scene" / "object_0.pltf", dir / "scene" / "object_1.pltf", dir / "scene" / "manifest.json"}}};

    for (const auto& [args, files] : runs) {
        const auto first = run(args);
        ASSERT_EQ(first.code, 0) << args[2] << ": " << first.err;
        std::vector<std::string> bytes;
        for (const auto& f : files) bytes.push_back(slurp(f));
        ASSERT_EQ(run(args).code, 0);
        for (std::size_t k = 0; k < files.size(); ++k) EXPECT_EQ(slurp(files[k]), bytes[k]) << files[k];

        const auto before = nlohmann::ordered_json::parse(bytes.back());
        const auto after = replay(files.back(), dir);
        EXPECT_EQ(after["outputs"], before["outputs"]) << args[2];
        EXPECT_EQ(after["config"], before["config"]);
    }

    // Edit changed only the target part's latents.
    const auto orig = read_pltf(a), edited = read_pltf(dir / "e.pltf");
    ASSERT_EQ(orig.parts.size(), edited.parts.size());
    EXPECT_NE(partlat::testing::max_abs(orig.parts[3].geo, edited.parts[3].geo), 0.0);
    const auto m = nlohmann::ordered_json::parse(slurp(dir / "e.pltf.manifest.json"));
    EXPECT_TRUE(m["details"].contains("inversion_max_residual"));
}

TEST(Cli, SeedChangesSample) {
    const auto dir = partlat::testing::scratch_dir("cli_seed");
    const auto cfg = small_config(dir);
    for (const auto* seed : {"1", "2"})
        ASSERT_EQ(run({"--config", cfg, "sample", "--parts", "2", "--seed", seed, "--out",
                       (dir / (std::string(seed) + ".pltf")).string()})
                      .code,
                  0);
    EXPECT_NE(slurp(dir / "1.pltf"), slurp(dir / "2.pltf"));
}
