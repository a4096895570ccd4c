// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#include "glyphroute/rng.hpp"

#include <cmath>

uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

uint64_t derive_seed(uint64_t root, uint64_t tag_a, uint64_t tag_b, uint64_t tag_c) {
    uint64_t s = root;
    uint64_t h = splitmix64(s);
    s ^= tag_a * 0x9e3779b97f4a7c15ULL;
    h ^= splitmix64(s);
    s ^= tag_b * 0xc2b2ae3d27d4eb4fULL;
    h ^= splitmix64(s);
    s ^= tag_c * 0x165667b19e3779f9ULL;
    h ^= splitmix64(s);
    return h;
}

uint64_t tag_hash(const char* tag) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const char* p = tag; *p; ++p) {
        h ^= static_cast<uint64_t>(static_cast<unsigned char>(*p));
        h *= 0x100000001b3ULL;
    }
    return h;
}

static inline uint64_t rotl(uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

Rng::Rng(uint64_t seed)
    : seed_(seed) {
    uint64_t sm = seed;
    for (auto& s : state_) {
        s = splitmix64(sm);
    }
}

uint64_t Rng::u64() {
    // xoshiro256++
    uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double Rng::uniform() {
    return static_cast<double>(u64() >> 11) * 0x1.0p-53;
}

uint64_t Rng::uniform_int(uint64_t n) {
    if (n == 0) return 0;
    // Rejection sampling to avoid modulo bias.
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v;
    do {
        v = u64();
    } while (v >= limit);
    return v % n;
}

double Rng::gaussian() {
    if (has_cached_gauss_) {
        has_cached_gauss_ = false;
        return cached_gauss_;
    }
    double u1, u2;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * 3.14159265358979323846 * u2;
    cached_gauss_ = r * std::sin(a);
    has_cached_gauss_ = true;
    return r * std::cos(a);
}

double Rng::gumbel() {
    double u;
    do {
        u = uniform();
    } while (u <= 0.0);
    return -std::log(-std::log(u));
}

Rng Rng::fork(uint64_t tag) const {
    return Rng(derive_seed(seed_, tag));
}
