// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "glyphroute/serialize.hpp"

// Drives the installed binary end to end. GLYPHROUTE_BIN is injected by the
// build so the test exercises exactly what ships.

namespace fs = std::filesystem;

namespace {

std::string bin() { return GLYPHROUTE_BIN; }

int run(const std::string& args) {
    std::string cmd = bin() + " " + args + " > /dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& sub) const { return (path / sub).string(); }
};

void write_config(const std::string& path, const nlohmann::json& extra = {}) {
    nlohmann::json j = {
        {"model", {{"image_size", 64}, {"ref_size", 32}}},
        {"data", {{"n_samples", 3}, {"subjects_min", 1}, {"subjects_max", 2}, {"seed", 77}}},
        {"train", {{"stage", "encoder"}, {"steps", 2}, {"batch", 1}, {"seed", 1}}},
        {"sample", {{"steps", 2}, {"guidance", 7.5}, {"seed", 3}}}};
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    write_json_file(path, j);
}

}  // namespace

TEST_CASE("unknown config keys are schema errors with a distinct exit code") {
    TempDir dir("gr_cli_schema");
    write_json_file(dir / "bad.json", {{"model", {{"imge_size", 64}}}});
    CHECK(run("census --config " + (dir / "bad.json") + " --out " + (dir / "o")) == 2);

    write_json_file(dir / "bad2.json", {{"modle", nlohmann::json::object()}});
    CHECK(run("census --config " + (dir / "bad2.json") + " --out " + (dir / "o")) == 2);
}

TEST_CASE("missing files exit with the io code") {
    TempDir dir("gr_cli_io");
    CHECK(run("viz --trace " + (dir / "absent.gra") + " --out " + (dir / "o")) == 3);
}

TEST_CASE("synth is reproducible through its run manifest") {
    TempDir dir("gr_cli_synth");
    write_config(dir / "config.json");
    REQUIRE(run("synth --config " + (dir / "config.json") + " --out " + (dir / "ds")) == 0);
    CHECK(fs::exists(dir / "ds/manifest.json"));
    CHECK(fs::exists(dir / "ds/run_manifest.json"));
    CHECK(run("rerun --manifest " + (dir / "ds/run_manifest.json") + " --out " +
              (dir / "replay")) == 0);
}

TEST_CASE("full pipeline: train both stages, sample, segment, viz, rerun") {
    TempDir dir("gr_cli_pipeline");
    write_config(dir / "config.json");
    REQUIRE(run("synth --config " + (dir / "config.json") + " --out " + (dir / "ds")) == 0);

    REQUIRE(run("train --config " + (dir / "config.json") + " --dataset " +
                (dir / "ds/manifest.json") + " --stage encoder --out " + (dir / "s1")) == 0);
    REQUIRE(fs::exists(dir / "s1/checkpoint.gra"));
    REQUIRE(fs::exists(dir / "s1/metrics.csv"));

    REQUIRE(run("train --config " + (dir / "config.json") + " --dataset " +
                (dir / "ds/manifest.json") + " --stage router --init " +
                (dir / "s1/checkpoint.gra") + " --out " + (dir / "s2")) == 0);

    // sample with a paper-default invocation, overridden to 2 steps by config
    REQUIRE(run("sample --config " + (dir / "config.json") + " --checkpoint " +
                (dir / "s2/checkpoint.gra") +
                " --prompt \"a red circle on a blue background\" --ref-identity 16 --out " +
                (dir / "samp")) == 0);
    CHECK(fs::exists(dir / "samp/sample.png"));
    CHECK(fs::exists(dir / "samp/trace.gra"));

    // unknown caption word is a config error
    CHECK(run("sample --config " + (dir / "config.json") + " --checkpoint " +
              (dir / "s2/checkpoint.gra") + " --prompt \"a shiny circle\" --ref-identity 16"
              " --out " + (dir / "sampbad")) == 2);

    REQUIRE(run("segment --checkpoint " + (dir / "s2/checkpoint.gra") + " --image " +
                (dir / "ds/sample_0_scene.png") + " --ref " + (dir / "ds/sample_0_ref0.png") +
                " --out " + (dir / "seg")) == 0);
    CHECK(fs::exists(dir / "seg/mask_subject0.png"));
    CHECK(fs::exists(dir / "seg/mask_background.png"));

    REQUIRE(run("viz --trace " + (dir / "samp/trace.gra") + " --out " + (dir / "viz")) == 0);
    CHECK(fs::exists(dir / "viz/routing_mosaic.png"));

    // replay the sample run and verify hashes
    CHECK(run("rerun --manifest " + (dir / "samp/run_manifest.json") + " --out " +
              (dir / "samp_replay")) == 0);

    // tampering with the checkpoint makes rerun fail with the checksum code
    {
        auto bytes = read_file_bytes(dir / "s2/checkpoint.gra");
        bytes[bytes.size() / 2] ^= 0xff;
        write_file_bytes(dir / "s2/checkpoint.gra", bytes);
    }
    CHECK(run("rerun --manifest " + (dir / "samp/run_manifest.json") + " --out " +
              (dir / "samp_replay2")) == 4);
}

TEST_CASE("census matches the library result") {
    TempDir dir("gr_cli_census");
    write_config(dir / "config.json");
    REQUIRE(run("census --config " + (dir / "config.json") + " --out " + (dir / "c")) == 0);
    auto j = read_json_file(dir / "c/census.json");
    CHECK(j.at("simplified").get<size_t>() < j.at("full").get<size_t>());
    CHECK(j.at("full").get<size_t>() - j.at("simplified").get<size_t>() ==
          j.at("removed_by_simplification").get<size_t>());
}
