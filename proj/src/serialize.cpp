// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#include "glyphroute/serialize.hpp"

#include <cstring>
#include <fstream>

#include "glyphroute/errors.hpp"

namespace {

constexpr char kMagic[4] = {'G', 'R', 'T', 'A'};
constexpr uint32_t kVersion = 1;

void require_little_endian() {
    uint32_t probe = 1;
    uint8_t first;
    std::memcpy(&first, &probe, 1);
    GR_CHECK(first == 1, IoError, "tensor archives require a little-endian host");
}

template <typename T>
void append_pod(std::vector<uint8_t>& out, const T& v) {
    const auto* p = reinterpret_cast<const uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
}

}  // namespace

void TensorArchive::put(const std::string& name, const Tensor& t) {
    GR_CHECK(!has(name), ConfigError, "duplicate tensor in archive: " + name);
    tensors.emplace_back(name, t);
}

const Tensor& TensorArchive::get(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
        if (n == name) return t;
    }
    throw IoError("tensor not found in archive: " + name);
}

bool TensorArchive::has(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
        if (n == name) return true;
    }
    return false;
}

void TensorArchive::save(const std::string& path, ArchiveDtype dtype) const {
    require_little_endian();
    nlohmann::json manifest;
    manifest["meta"] = meta;
    auto list = nlohmann::json::array();
    for (const auto& [name, t] : tensors) {
        list.push_back({{"name", name},
                        {"dtype", dtype == ArchiveDtype::f64 ? "f64" : "f32"},
                        {"rows", t->rows},
                        {"cols", t->cols}});
    }
    manifest["tensors"] = list;
    std::string json_str = manifest.dump();

    std::vector<uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    append_pod(out, kVersion);
    uint64_t json_len = json_str.size();
    append_pod(out, json_len);
    out.insert(out.end(), json_str.begin(), json_str.end());
    for (const auto& [name, t] : tensors) {
        (void)name;
        if (dtype == ArchiveDtype::f64) {
            const auto* p = reinterpret_cast<const uint8_t*>(t->v.data());
            out.insert(out.end(), p, p + t->v.size() * sizeof(double));
        } else {
            for (double d : t->v) {
                float f = static_cast<float>(d);
                append_pod(out, f);
            }
        }
    }
    write_file_bytes(path, out);
}

TensorArchive TensorArchive::load(const std::string& path) {
    require_little_endian();
    auto bytes = read_file_bytes(path);
    GR_CHECK(bytes.size() >= 16, IoError, "tensor archive truncated: " + path);
    GR_CHECK(std::memcmp(bytes.data(), kMagic, 4) == 0, IoError,
             "bad tensor archive magic: " + path);
    uint32_t version;
    std::memcpy(&version, bytes.data() + 4, 4);
    GR_CHECK(version == kVersion, IoError, "unsupported tensor archive version");
    uint64_t json_len;
    std::memcpy(&json_len, bytes.data() + 8, 8);
    GR_CHECK(16 + json_len <= bytes.size(), IoError, "tensor archive manifest truncated");
    nlohmann::json manifest = nlohmann::json::parse(
        bytes.begin() + 16, bytes.begin() + 16 + static_cast<ptrdiff_t>(json_len));

    TensorArchive ar;
    ar.meta = manifest.value("meta", nlohmann::json::object());
    size_t offset = 16 + json_len;
    for (const auto& e : manifest["tensors"]) {
        std::string name = e["name"];
        std::string dtype = e["dtype"];
        int rows = e["rows"];
        int cols = e["cols"];
        auto t = make_tensor(rows, cols);
        size_t count = t->size();
        if (dtype == "f64") {
            size_t nbytes = count * sizeof(double);
            GR_CHECK(offset + nbytes <= bytes.size(), IoError, "tensor payload truncated");
            std::memcpy(t->v.data(), bytes.data() + offset, nbytes);
            offset += nbytes;
        } else if (dtype == "f32") {
            size_t nbytes = count * sizeof(float);
            GR_CHECK(offset + nbytes <= bytes.size(), IoError, "tensor payload truncated");
            for (size_t i = 0; i < count; i++) {
                float f;
                std::memcpy(&f, bytes.data() + offset + i * sizeof(float), sizeof(float));
                t->v[i] = static_cast<double>(f);
            }
            offset += nbytes;
        } else {
            throw IoError("unsupported tensor dtype: " + dtype);
        }
        ar.tensors.emplace_back(std::move(name), std::move(t));
    }
    return ar;
}

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream f(path);
    GR_CHECK(f.good(), IoError, "cannot open JSON file: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("JSON parse error in " + path + ": " + e.what());
    }
    return j;
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
    std::ofstream f(path);
    GR_CHECK(f.good(), IoError, "cannot write JSON file: " + path);
    f << j.dump(2) << "\n";
    GR_CHECK(f.good(), IoError, "short write to JSON file: " + path);
}

void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary);
    GR_CHECK(f.good(), IoError, "cannot open file for writing: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    GR_CHECK(f.good(), IoError, "short write: " + path);
}

std::vector<uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    GR_CHECK(f.good(), IoError, "cannot open file: " + path);
    auto size = f.tellg();
    f.seekg(0);
    std::vector<uint8_t> bytes(static_cast<size_t>(size));
    f.read(reinterpret_cast<char*>(bytes.data()), size);
    GR_CHECK(f.good(), IoError, "short read: " + path);
    return bytes;
}
