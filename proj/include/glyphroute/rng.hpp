// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

// Deterministic, self-contained RNG. std::mt19937 distributions are
// implementation-defined across standard libraries, so all sampling here is
// hand-rolled: xoshiro256++ core, Box-Muller gaussians.
//
// Streams are derived, never shared: derive_seed() hashes a root seed with a
// sequence of tags so that independent consumers (per sample, per step, per
// purpose) get decorrelated seeds without coordinating call order.

uint64_t splitmix64(uint64_t& state);

// One-shot hash chain for seed derivation.
uint64_t derive_seed(uint64_t root, uint64_t tag_a, uint64_t tag_b = 0, uint64_t tag_c = 0);

// FNV-1a over a byte-free string tag, for naming stream purposes.
uint64_t tag_hash(const char* tag);

struct Rng {
    explicit Rng(uint64_t seed);

    uint64_t u64();
    // Uniform in [0, 1).
    double uniform();
    // Uniform integer in [0, n).
    uint64_t uniform_int(uint64_t n);
    // Standard normal via Box-Muller (second value cached).
    double gaussian();
    // Gumbel(0, 1) sample: -log(-log(u)).
    double gumbel();

    // Child stream derived from this stream's seed lineage and a tag.
    Rng fork(uint64_t tag) const;

private:
    uint64_t state_[4];
    uint64_t seed_;
    double cached_gauss_ = 0.0;
    bool has_cached_gauss_ = false;
};
