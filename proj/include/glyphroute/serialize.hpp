// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "glyphroute/tensor.hpp"

// Named-tensor archive: "GRTA" magic, version, embedded JSON manifest
// (tensor names, dtypes, shapes, user metadata), then raw little-endian
// payload in manifest order. Checkpoints store f64 so that load(save(x))
// is exactly x; bulk diagnostics (routing traces) store f32.

enum class ArchiveDtype { f32, f64 };

struct TensorArchive {
    nlohmann::json meta = nlohmann::json::object();
    std::vector<std::pair<std::string, Tensor>> tensors;

    void put(const std::string& name, const Tensor& t);
    const Tensor& get(const std::string& name) const;
    bool has(const std::string& name) const;

    void save(const std::string& path, ArchiveDtype dtype = ArchiveDtype::f64) const;
    static TensorArchive load(const std::string& path);
};

nlohmann::json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& j);

void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes);
std::vector<uint8_t> read_file_bytes(const std::string& path);
