// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "glyphroute/nn.hpp"

// Decoupled instance-aware subject router. Per subject, a single routing
// token is compressed from the concept trunk's patch features by a one-query
// query-transformer (a separate branch from the subject tokens, which is the
// decoupling). At every cross-attention layer the router predicts a coarse
// map from a projected inner product, refines the tokens with masked
// cross-attention over the latent, and re-projects to refined maps. Maps are
// a softmax over the token axis (subjects first, background last), hardened
// to a one-hot partition by argmax at eval time or by a straight-through
// Gumbel-softmax during training.

enum class HardenMode { eval, train };

struct RoutingMapsLayer {
    Tensor soft;  // (N+1) x hw; columns sum to 1
    Tensor hard;  // (N+1) x hw; one-hot columns (straight-through in train mode)
    int h = 0, w = 0;
    int subjects = 0;  // N; background row is index N
};

// Argmax one-hot per column with ties to the lowest row index (eval), or
// hard Gumbel-softmax forward with the soft relaxation's gradient (train).
Tensor harden(Tape& t, const Tensor& soft_maps, HardenMode mode, double temperature = 1.0,
              Rng* gumbel_rng = nullptr);

// lambda * (1/N) * sum_i ||M_i - M_i_gt||^2 per layer, averaged over layers;
// background row excluded; N = 0 contributes zero.
Tensor routing_loss(Tape& t, const std::vector<RoutingMapsLayer>& layers,
                    const std::vector<std::vector<double>>& gt_masks, int image_h,
                    int image_w, double lambda);

struct RouterLayer {
    Linear coarse_z;  // c_l -> d_r
    Linear coarse_r;  // d_r -> d_r
    Linear refine_q;  // d_r -> d_r
    Linear refine_k;  // c_l -> d_r
    Linear refine_v;  // c_l -> d_r
    Linear refine_o;  // d_r -> d_r, zero-init (refinement starts as identity)
    Linear mlp1;      // d_r -> 2*d_r
    Linear mlp2;      // 2*d_r -> d_r, zero-init
    Linear final_z;   // c_l -> d_r
    Linear final_r;   // d_r -> d_r
};

struct RouterOptions {
    HardenMode mode = HardenMode::eval;
    double gumbel_temperature = 1.0;
    Rng* gumbel_rng = nullptr;
};

struct Router {
    int routing_dim = 0;

    // one-query query-transformer over concept trunk features
    struct QLayer {
        Linear sq, sk, sv, so;  // degenerate self path (single query)
        Linear cq, ck, cv, co;  // cross over trunk features
        Linear f1, f2;
        LayerNorm ln1, ln2, ln3;
    };
    Tensor query;  // 1 x d_r
    Linear feat_proj;  // trunk width -> d_r (shared key/value input proj)
    std::vector<QLayer> qlayers;
    std::vector<RouterLayer> layers;

    static Router create(ParamRegistry& reg, int trunk_width, int routing_dim,
                         int qformer_layers, const std::vector<int>& layer_channels, Rng& rng);

    // Single routing token from trunk patch features ((n+1) x trunk_width).
    Tensor routing_token(Tape& t, const Tensor& trunk_features) const;

    // Coarse logits: <proj_r(R_i), proj_z(Z_u)> / sqrt(d_r), rows = tokens.
    Tensor coarse_logits(Tape& t, int layer, const Tensor& tokens, const Tensor& z) const;

    // Full per-layer routing: coarse map, masked-cross-attention refinement
    // (empty-region tokens fall back to unmasked attention), refined maps.
    RoutingMapsLayer compute_maps(Tape& t, int layer, const Tensor& tokens, const Tensor& z,
                                  int h, int w, const RouterOptions& opt) const;

    // Refinement step exposed for tests: returns refined soft maps given
    // externally supplied coarse maps.
    Tensor refine_maps(Tape& t, int layer, const Tensor& tokens, const Tensor& z,
                       const Tensor& coarse_soft, const RouterOptions& opt) const;
};

// ---- trace ----
struct RoutingTraceEntry {
    int step = 0;     // sampler step index
    int substep = 0;  // 0 = Euler stage, 1 = Heun correction stage
    int layer = 0;
    int h = 0, w = 0;
    int subjects = 0;
    std::vector<double> soft;  // (N+1) x hw row-major
    std::vector<double> hard;
};

struct RoutingTrace {
    std::vector<RoutingTraceEntry> entries;

    void save(const std::string& path) const;
    static RoutingTrace load(const std::string& path);
};
