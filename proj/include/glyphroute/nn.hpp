// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "glyphroute/tensor.hpp"

// Parameter bookkeeping. Every learnable tensor is registered with a name
// and a group; training stages freeze whole groups (the optimizer skips
// them), serialization walks the registry, and stage-isolation tests hash
// groups before/after.

enum class ParamGroup {
    denoiser,     // U-Net trunk, text embedder, time embedding
    inject,       // subject/reference K,V injection matrices in attention
    concept_enc,  // patch transformer trunk + subject query-transformer
    detail,       // detail encoder (denoiser clone minus cross-attention)
    router,       // routing query-transformer + per-layer routing projections
};

const char* param_group_name(ParamGroup g);

struct ParamRegistry {
    struct Entry {
        std::string name;
        ParamGroup group;
        Tensor t;
        Tensor adam_m;
        Tensor adam_v;
    };

    Tensor add(const std::string& name, ParamGroup group, Tensor t);
    std::vector<Entry>& entries() { return entries_; }
    const std::vector<Entry>& entries() const { return entries_; }
    const Entry* find(const std::string& name) const;

    size_t scalar_count() const;
    size_t scalar_count(ParamGroup g) const;
    // Order-sensitive FNV hash over all tensors in a group (bitwise).
    uint64_t group_hash(ParamGroup g) const;
    void zero_grads();

private:
    std::vector<Entry> entries_;
};

struct Linear {
    Tensor w;  // [in x out]
    Tensor b;  // [1 x out], null when bias-free

    static Linear create(ParamRegistry& reg, const std::string& name, ParamGroup group,
                         int in, int out, Rng& rng, bool zero_init = false, bool bias = true);
    Tensor forward(Tape& t, const Tensor& x) const;
    int in_dim() const { return w->rows; }
    int out_dim() const { return w->cols; }
};

struct LayerNorm {
    Tensor gamma;
    Tensor beta;

    static LayerNorm create(ParamRegistry& reg, const std::string& name, ParamGroup group,
                            int dim);
    Tensor forward(Tape& t, const Tensor& x) const;
};

// Multi-head attention primitive. q:[nq x d], k:[nk x d], v:[nk x d],
// optional additive logit bias [nq x nk] shared across heads. Per-head
// scaling 1/sqrt(d/heads).
Tensor multihead_attention(Tape& t, const Tensor& q, const Tensor& k, const Tensor& v,
                           int heads, const Tensor& bias = nullptr);

// 3x3 zero-padded convolution on an (h*w) x cin feature map, expressed as
// im2col + matmul so backward falls out of the autograd graph.
// w: [(9*cin) x cout]. stride 1 or 2; output size written to oh/ow.
Tensor im2col3x3(Tape& t, const Tensor& x, int h, int w, int stride, int& oh, int& ow);
Tensor conv3x3(Tape& t, const Tensor& x, int h, int w, const Linear& filt, int stride,
               int& oh, int& ow);

// Nearest-neighbor 2x upsample of an (h*w) x c map.
Tensor upsample2x(Tape& t, const Tensor& x, int h, int w);

// Nearest-neighbor resample of a flat h0*w0 scalar field to h1*w1 (no grad).
std::vector<double> resample_nearest(const std::vector<double>& src, int h0, int w0,
                                     int h1, int w1);

// Differentiable nearest resample of per-row spatial fields: x is
// [rows x h0*w0], result [rows x h1*w1]. Used to carry routing maps across
// resolution changes while keeping the straight-through gradient intact.
Tensor resample_rows_nearest(Tape& t, const Tensor& x, int h0, int w0, int h1, int w1);

// Fixed sinusoidal feature row [1 x dim] for a scalar conditioning input.
Tensor sinusoidal_features(double x, int dim);
