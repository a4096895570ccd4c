// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "glyphroute/model_config.hpp"
#include "glyphroute/router.hpp"

// Miniature U-Net epsilon-predictor. Block order within each transformer
// block: self-attention (with routed reference attention from block 1 on,
// masked by the previous cross-attention layer's hardened maps), then the
// router predicts this layer's maps from the current stream, then routed
// subject cross-attention injects text + subject tokens, then the FFN.
// The first self-attention layer runs plain (no maps exist yet and the
// detail encoder's first-layer features are dropped to match).

struct SubjectEncoding {
    Tensor E;                // m x d_c concept tokens
    std::vector<Tensor> G;   // per-block detail features; empty for background
    Tensor R;                // 1 x d_r routing token
    uint32_t identity_id = 0;
};

struct ConditioningBundle {
    Tensor text;  // tokens x d_c
    std::vector<SubjectEncoding> subjects;
    SubjectEncoding background;  // E and R only
    double eta = 1.0;
    double gamma = 0.0;
};

enum class RoutingOverride { none, force_ones, force_gt };

struct ForwardOptions {
    RouterOptions router;
    RoutingOverride override_mode = RoutingOverride::none;
    const std::vector<std::vector<double>>* gt_masks = nullptr;  // image-res, for force_gt
    int gt_h = 0, gt_w = 0;
};

struct DenoiseOutput {
    Tensor eps;
    std::vector<RoutingMapsLayer> maps;  // one per cross-attention layer
};

// ---- attention ops (pre-output-projection, as tested against oracles) ----

struct SubjectAttnParams {
    const Linear* q;
    const Linear* text_k;
    const Linear* text_v;
    const Linear* subj_k;  // trainable injection K (concept path)
    const Linear* subj_v;  // trainable injection V (concept path)
    int heads = 1;
};

// softmax(QK^T/sqrt(d))V + eta * sum_i sigma(M_i) ⊙ softmax(Q K̂_i^T/sqrt(d)) V̂_i
// subject_tokens holds N+1 entries with the background last; hard_maps is
// (N+1) x hw aligned with it.
Tensor routed_subject_attention(Tape& t, const Tensor& z, const Tensor& text_c,
                                const std::vector<Tensor>& subject_tokens,
                                const Tensor& hard_maps, const SubjectAttnParams& p,
                                double eta);

struct ReferenceAttnParams {
    const Linear* q;
    const Linear* k;
    const Linear* v;
    const Linear* ref_k;  // detail-feature injection K
    const Linear* ref_v;  // detail-feature injection V
    int heads = 1;
};

// Concat-key self attention over [self keys, per-subject reference keys]
// with additive bias [0, g(M_i)+gamma, ...]; g is 0 where the position is
// routed to subject i and -inf otherwise. subject_maps is N x hw (hard);
// pass null or empty g_feats for plain self-attention.
Tensor routed_reference_attention(Tape& t, const Tensor& z,
                                  const std::vector<Tensor>& g_feats,
                                  const Tensor& subject_maps, const ReferenceAttnParams& p,
                                  double gamma, bool train_mode);

// Classifier-free guidance combination: uncond + scale * (cond - uncond).
Tensor cfg_combine(const Tensor& uncond_eps, const Tensor& cond_eps, double scale);

// ---- building blocks ----

struct ResBlock {
    LayerNorm ln1, ln2;
    Linear conv1, conv2;  // 3x3 filters stored as (9*cin) x cout
    Linear skip;          // 1x1 when cin != cout
    bool has_skip = false;
    Linear time_proj;
    bool has_time = false;

    static ResBlock create(ParamRegistry& reg, const std::string& name, ParamGroup group,
                           int cin, int cout, int time_dim, Rng& rng);
    Tensor forward(Tape& t, const Tensor& x, int h, int w, const Tensor& temb) const;
};

struct SelfFfn {
    LayerNorm ln_self;
    Linear q, k, v, o;
    LayerNorm ln_ffn;
    Linear f1, f2;

    static SelfFfn create(ParamRegistry& reg, const std::string& name, ParamGroup group,
                          int c, int d, int ffn_mult, Rng& rng);
};

struct DenoiserBlock {
    SelfFfn self;
    Linear ref_k, ref_v;  // inject group; absent on block 0
    bool has_ref = false;
    LayerNorm ln_cross;
    Linear cross_q, cross_o;
    Linear text_k, text_v;
    Linear subj_k, subj_v;  // inject group; subj_v zero-init
};

struct Denoiser {
    ModelConfig cfg;
    Linear conv_in;
    Linear down;     // 3x3 stride 2
    Linear up_conv;  // 3x3 after nearest upsample
    std::vector<ResBlock> res;
    std::vector<DenoiserBlock> blocks;
    LayerNorm ln_out;
    Linear conv_out;  // zero-init
    Linear in_skip;   // 1x1 input->output long skip, zero-init
    Linear time1, time2;

    // text conditioning
    Tensor tok_embed;  // vocab x d_c
    Tensor pos_embed;  // text_len x d_c
    LayerNorm text_ln;

    static Denoiser create(ParamRegistry& reg, const ModelConfig& cfg, int vocab, int text_len,
                           Rng& rng);

    Tensor encode_text(Tape& t, const std::vector<int>& tokens) const;

    // lambda_cond = log(sigma_t/alpha_t): the noise-level conditioning.
    DenoiseOutput forward(Tape& t, const Tensor& z_t, double lambda_cond,
                          const ConditioningBundle& bundle, const Router& router,
                          const ForwardOptions& opt) const;
};
