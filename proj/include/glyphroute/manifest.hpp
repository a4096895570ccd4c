// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>

#include <json.hpp>

// Run provenance. Every CLI command writes a RunManifest next to its
// artifacts: the resolved configuration, the seeds, the input checkpoint
// hash, and a content hash per output artifact. `glyphroute rerun` replays
// a manifest into a fresh directory and verifies the hashes match bitwise.

struct RunManifest {
    std::string command;
    nlohmann::json resolved_config;           // full config + command arguments
    std::string input_checkpoint_hash;        // empty when no checkpoint involved
    std::map<std::string, std::string> artifact_hashes;  // relative path -> sha256
    double wall_seconds = 0.0;
    std::string code_version;

    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
    void save(const std::string& path) const;
    static RunManifest load(const std::string& path);
};

const char* glyphroute_version();

// Hash one artifact file and record it under its basename.
void record_artifact(RunManifest& m, const std::string& path);
