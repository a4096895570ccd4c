// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

// FIPS 180-4 SHA-256, used for artifact and checkpoint content hashes.

struct Sha256 {
    Sha256();
    void update(const void* data, size_t len);
    // Finalizes into a 32-byte digest; do not update afterwards.
    void finish(uint8_t out[32]);
    std::string finish_hex();

private:
    void process_block(const uint8_t* block);
    uint32_t state_[8];
    uint64_t total_len_ = 0;
    uint8_t buffer_[64];
    size_t buffer_len_ = 0;
};

std::string sha256_hex(const void* data, size_t len);
std::string sha256_file_hex(const std::string& path);
