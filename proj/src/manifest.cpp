// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#include "glyphroute/manifest.hpp"

#include <filesystem>

#include "glyphroute/errors.hpp"
#include "glyphroute/serialize.hpp"
#include "glyphroute/sha256.hpp"

const char* glyphroute_version() { return "glyphroute 0.1.0"; }

nlohmann::json RunManifest::to_json() const {
    return {{"format", "glyphroute-run-v1"},
            {"command", command},
            {"resolved_config", resolved_config},
            {"input_checkpoint_hash", input_checkpoint_hash},
            {"artifact_hashes", artifact_hashes},
            {"wall_seconds", wall_seconds},
            {"code_version", code_version}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
    GR_CHECK(j.value("format", "") == "glyphroute-run-v1", ConfigError,
             "not a run manifest");
    RunManifest m;
    m.command = j.at("command");
    m.resolved_config = j.at("resolved_config");
    m.input_checkpoint_hash = j.value("input_checkpoint_hash", "");
    m.artifact_hashes = j.at("artifact_hashes").get<std::map<std::string, std::string>>();
    m.wall_seconds = j.value("wall_seconds", 0.0);
    m.code_version = j.value("code_version", "");
    return m;
}

void RunManifest::save(const std::string& path) const { write_json_file(path, to_json()); }

RunManifest RunManifest::load(const std::string& path) {
    return from_json(read_json_file(path));
}

void record_artifact(RunManifest& m, const std::string& path) {
    std::string name = std::filesystem::path(path).filename().string();
    m.artifact_hashes[name] = sha256_file_hex(path);
}
