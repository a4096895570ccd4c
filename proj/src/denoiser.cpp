// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#include "glyphroute/denoiser.hpp"

#include <cmath>

#include "glyphroute/errors.hpp"

namespace {
constexpr double kTrainMaskBias = 30.0;
constexpr double kEvalMaskBias = 1e30;
}  // namespace

Tensor routed_subject_attention(Tape& t, const Tensor& z, const Tensor& text_c,
                                const std::vector<Tensor>& subject_tokens,
                                const Tensor& hard_maps, const SubjectAttnParams& p,
                                double eta) {
    GR_CHECK(hard_maps->rows == static_cast<int>(subject_tokens.size()), ShapeError,
             "routed_subject_attention: maps/token count mismatch");
    GR_CHECK(hard_maps->cols == z->rows, ShapeError,
             "routed_subject_attention: maps/position mismatch");
    auto q = p.q->forward(t, z);
    auto text_out = multihead_attention(t, q, p.text_k->forward(t, text_c),
                                        p.text_v->forward(t, text_c), p.heads);
    Tensor inject;
    for (size_t i = 0; i < subject_tokens.size(); i++) {
        auto branch = multihead_attention(t, q, p.subj_k->forward(t, subject_tokens[i]),
                                          p.subj_v->forward(t, subject_tokens[i]), p.heads);
        auto sigma_col = transpose(t, slice_rows(t, hard_maps, static_cast<int>(i), 1));
        auto masked = mul_colvec(t, branch, sigma_col);
        inject = inject ? add(t, inject, masked) : masked;
    }
    return add_scaled(t, text_out, inject, eta);
}

Tensor routed_reference_attention(Tape& t, const Tensor& z,
                                  const std::vector<Tensor>& g_feats,
                                  const Tensor& subject_maps, const ReferenceAttnParams& p,
                                  double gamma, bool train_mode) {
    auto q = p.q->forward(t, z);
    auto k_self = p.k->forward(t, z);
    auto v_self = p.v->forward(t, z);
    if (g_feats.empty() || !subject_maps) {
        return multihead_attention(t, q, k_self, v_self, p.heads);
    }
    GR_CHECK(subject_maps->rows == static_cast<int>(g_feats.size()), ShapeError,
             "routed_reference_attention: maps/feature count mismatch");
    GR_CHECK(subject_maps->cols == z->rows, ShapeError,
             "routed_reference_attention: maps/position mismatch");

    int hw = z->rows;
    std::vector<Tensor> keys = {k_self};
    std::vector<Tensor> vals = {v_self};
    for (const auto& g : g_feats) {
        keys.push_back(p.ref_k->forward(t, g));
        vals.push_back(p.ref_v->forward(t, g));
    }
    auto k_cat = concat_rows(t, keys);
    auto v_cat = concat_rows(t, vals);

    Tensor bias;
    if (!train_mode) {
        // Exact eval path: masked reference keys get zero softmax weight.
        auto b = make_tensor(hw, k_cat->rows);
        int col = hw;
        for (size_t i = 0; i < g_feats.size(); i++) {
            int ncols = g_feats[i]->rows;
            for (int u = 0; u < hw; u++) {
                double g = subject_maps->at(static_cast<int>(i), u) > 0.5 ? 0.0 : -kEvalMaskBias;
                double val = g + gamma;
                for (int cx = 0; cx < ncols; cx++) b->at(u, col + cx) = val;
            }
            col += ncols;
        }
        bias = b;
    } else {
        // Straight-through path: bias = (sigma - 1) * scale + gamma keeps the
        // gradient to the routing maps alive.
        std::vector<Tensor> blocks = {make_tensor(hw, hw)};
        auto ones_col = full_tensor(hw, 1, 1.0);
        for (size_t i = 0; i < g_feats.size(); i++) {
            int ncols = g_feats[i]->rows;
            auto sigma_col = transpose(t, slice_rows(t, subject_maps, static_cast<int>(i), 1));
            auto gcol = scale(t, sub(t, sigma_col, ones_col), kTrainMaskBias);
            auto block = matmul(t, gcol, full_tensor(1, ncols, 1.0));
            if (gamma != 0.0) block = add(t, block, full_tensor(hw, ncols, gamma));
            blocks.push_back(block);
        }
        bias = concat_cols(t, blocks);
    }
    return multihead_attention(t, q, k_cat, v_cat, p.heads, bias);
}

Tensor cfg_combine(const Tensor& uncond_eps, const Tensor& cond_eps, double scale) {
    GR_CHECK(uncond_eps->rows == cond_eps->rows && uncond_eps->cols == cond_eps->cols,
             ShapeError, "cfg_combine: shape mismatch");
    // scale 0 and 1 select a branch exactly
    if (scale == 0.0) return clone_tensor(uncond_eps);
    if (scale == 1.0) return clone_tensor(cond_eps);
    auto out = make_tensor(uncond_eps->rows, uncond_eps->cols);
    for (size_t i = 0; i < out->size(); i++) {
        out->v[i] = uncond_eps->v[i] + scale * (cond_eps->v[i] - uncond_eps->v[i]);
    }
    return out;
}

ResBlock ResBlock::create(ParamRegistry& reg, const std::string& name, ParamGroup group,
                          int cin, int cout, int time_dim, Rng& rng) {
    ResBlock b;
    b.ln1 = LayerNorm::create(reg, name + ".ln1", group, cin);
    b.conv1 = Linear::create(reg, name + ".conv1", group, 9 * cin, cout, rng);
    b.ln2 = LayerNorm::create(reg, name + ".ln2", group, cout);
    // pointwise second conv; attention supplies the global mixing
    b.conv2 = Linear::create(reg, name + ".conv2", group, cout, cout, rng);
    if (cin != cout) {
        b.skip = Linear::create(reg, name + ".skip", group, cin, cout, rng, false, false);
        b.has_skip = true;
    }
    if (time_dim > 0) {
        b.time_proj = Linear::create(reg, name + ".time", group, time_dim, cout, rng);
        b.has_time = true;
    }
    return b;
}

Tensor ResBlock::forward(Tape& t, const Tensor& x, int h, int w, const Tensor& temb) const {
    int oh = 0, ow = 0;
    auto h1 = conv3x3(t, silu(t, ln1.forward(t, x)), h, w, conv1, 1, oh, ow);
    if (has_time && temb) {
        h1 = add_rowvec(t, h1, time_proj.forward(t, silu(t, temb)));
    }
    auto h2 = conv2.forward(t, silu(t, ln2.forward(t, h1)));
    auto res = has_skip ? skip.forward(t, x) : x;
    return add(t, res, h2);
}

SelfFfn SelfFfn::create(ParamRegistry& reg, const std::string& name, ParamGroup group,
                        int c, int d, int ffn_mult, Rng& rng) {
    SelfFfn s;
    s.ln_self = LayerNorm::create(reg, name + ".lns", group, c);
    s.q = Linear::create(reg, name + ".q", group, c, d, rng);
    s.k = Linear::create(reg, name + ".k", group, c, d, rng);
    s.v = Linear::create(reg, name + ".v", group, c, d, rng);
    s.o = Linear::create(reg, name + ".o", group, d, c, rng);
    s.ln_ffn = LayerNorm::create(reg, name + ".lnf", group, c);
    s.f1 = Linear::create(reg, name + ".f1", group, c, ffn_mult * c, rng);
    s.f2 = Linear::create(reg, name + ".f2", group, ffn_mult * c, c, rng);
    return s;
}

Denoiser Denoiser::create(ParamRegistry& reg, const ModelConfig& cfg, int vocab, int text_len,
                          Rng& rng) {
    Denoiser d;
    d.cfg = cfg;
    const ParamGroup DG = ParamGroup::denoiser;
    const ParamGroup IG = ParamGroup::inject;
    int cl = cfg.latent_channels();
    auto chans = cfg.block_channels();

    d.conv_in = Linear::create(reg, "denoiser.conv_in", DG, 9 * cl, chans[0], rng);
    // Identity-leaning center tap gives the trunk a content-preserving path
    // from step one; low-noise denoising needs the input passed through.
    for (int c = 0; c < std::min(cl, chans[0]); c++) {
        d.conv_in.w->at(4 * cl + c, c) += 0.5;
    }
    d.in_skip = Linear::create(reg, "denoiser.in_skip", DG, cl, cl, rng, true, false);
    d.down = Linear::create(reg, "denoiser.down", DG, 9 * chans[0], chans[1], rng);
    d.up_conv = Linear::create(reg, "denoiser.up", DG, 9 * chans[2], chans[3], rng);
    d.time1 = Linear::create(reg, "denoiser.time1", DG, cfg.time_dim, cfg.time_dim, rng);
    d.time2 = Linear::create(reg, "denoiser.time2", DG, cfg.time_dim, cfg.time_dim, rng);

    for (int b = 0; b < cfg.n_blocks(); b++) {
        std::string nm = "denoiser.b" + std::to_string(b);
        int cin = chans[b];
        if (b == 3) cin = chans[3] + chans[0];  // skip concat from block 0
        d.res.push_back(ResBlock::create(reg, nm + ".res", DG, cin, chans[b], cfg.time_dim, rng));

        DenoiserBlock blk;
        blk.self = SelfFfn::create(reg, nm + ".self", DG, chans[b], cfg.attn_dim, cfg.ffn_mult,
                                   rng);
        if (b > 0) {
            blk.ref_k = Linear::create(reg, nm + ".refk", IG, chans[b], cfg.attn_dim, rng);
            blk.ref_v = Linear::create(reg, nm + ".refv", IG, chans[b], cfg.attn_dim, rng);
            blk.has_ref = true;
        }
        blk.ln_cross = LayerNorm::create(reg, nm + ".lnc", DG, chans[b]);
        blk.cross_q = Linear::create(reg, nm + ".crossq", DG, chans[b], cfg.attn_dim, rng);
        blk.cross_o = Linear::create(reg, nm + ".crosso", DG, cfg.attn_dim, chans[b], rng);
        blk.text_k = Linear::create(reg, nm + ".textk", DG, cfg.text_dim, cfg.attn_dim, rng);
        blk.text_v = Linear::create(reg, nm + ".textv", DG, cfg.text_dim, cfg.attn_dim, rng);
        blk.subj_k = Linear::create(reg, nm + ".subjk", IG, cfg.text_dim, cfg.attn_dim, rng);
        // Zero value projection: subject injection starts as a no-op.
        blk.subj_v = Linear::create(reg, nm + ".subjv", IG, cfg.text_dim, cfg.attn_dim, rng,
                                    true);
        d.blocks.push_back(std::move(blk));
    }

    d.ln_out = LayerNorm::create(reg, "denoiser.ln_out", DG, chans[3]);
    d.conv_out = Linear::create(reg, "denoiser.conv_out", DG, 9 * chans[3], cl, rng, true);

    d.tok_embed = reg.add("denoiser.text.tok", DG, randn_tensor(vocab, cfg.text_dim, rng, 0.5));
    d.pos_embed = reg.add("denoiser.text.pos", DG,
                          randn_tensor(text_len, cfg.text_dim, rng, 0.02));
    d.text_ln = LayerNorm::create(reg, "denoiser.text.ln", DG, cfg.text_dim);
    return d;
}

Tensor Denoiser::encode_text(Tape& t, const std::vector<int>& tokens) const {
    GR_CHECK(static_cast<int>(tokens.size()) == pos_embed->rows, ShapeError,
             "encode_text: caption length mismatch");
    auto emb = gather_rows(t, tok_embed, tokens);
    emb = add(t, emb, pos_embed);
    return text_ln.forward(t, emb);
}

namespace {

RoutingMapsLayer forced_maps(int n_subjects, int h, int w, RoutingOverride mode,
                             const std::vector<std::vector<double>>* gt, int gt_h, int gt_w) {
    RoutingMapsLayer ml;
    ml.h = h;
    ml.w = w;
    ml.subjects = n_subjects;
    int hw = h * w;
    if (mode == RoutingOverride::force_ones) {
        ml.soft = full_tensor(n_subjects + 1, hw, 1.0);
        ml.hard = full_tensor(n_subjects + 1, hw, 1.0);
        return ml;
    }
    GR_CHECK(gt != nullptr && static_cast<int>(gt->size()) == n_subjects, ConfigError,
             "force_gt requires ground-truth masks");
    auto m = make_tensor(n_subjects + 1, hw);
    for (int i = 0; i < n_subjects; i++) {
        auto d = resample_nearest((*gt)[static_cast<size_t>(i)], gt_h, gt_w, h, w);
        for (int u = 0; u < hw; u++) m->at(i, u) = d[static_cast<size_t>(u)] > 0.5 ? 1.0 : 0.0;
    }
    for (int u = 0; u < hw; u++) {
        double cover = 0;
        for (int i = 0; i < n_subjects; i++) cover = std::max(cover, m->at(i, u));
        m->at(n_subjects, u) = cover > 0.5 ? 0.0 : 1.0;
    }
    ml.soft = m;
    ml.hard = clone_tensor(m);
    return ml;
}

}  // namespace

DenoiseOutput Denoiser::forward(Tape& t, const Tensor& z_t, double lambda_cond,
                                const ConditioningBundle& bundle, const Router& router,
                                const ForwardOptions& opt) const {
    int hw_side = cfg.latent_hw();
    GR_CHECK(z_t->rows == hw_side * hw_side && z_t->cols == cfg.latent_channels(), ShapeError,
             "denoiser forward: latent shape mismatch");
    int n_subj = static_cast<int>(bundle.subjects.size());

    // EDM preconditioning around the epsilon parametrization: the trunk sees
    // c_in * x and predicts the residual of the denoised estimate; the
    // epsilon output is an exact scalar recombination. sigma_ratio is the
    // EDM-space sigma, alpha the VP bridge scale.
    double sigma_ratio = std::exp(lambda_cond);
    double sd = cfg.sigma_data;
    double alpha = 1.0 / std::sqrt(1.0 + sigma_ratio * sigma_ratio);
    double denom = std::sqrt(sigma_ratio * sigma_ratio + sd * sd);
    double in_scale = std::sqrt(1.0 + sigma_ratio * sigma_ratio) / denom;  // c_in / alpha
    double out_z = sigma_ratio / (alpha * denom * denom);                  // (1-c_skip)/sigma_vp
    double out_u = -sd / denom;                                            // -c_out/sigma_ratio

    // Routing tokens: subjects first, background last.
    Tensor tokens;
    {
        std::vector<Tensor> rows;
        for (const auto& s : bundle.subjects) rows.push_back(s.R);
        rows.push_back(bundle.background.R);
        tokens = concat_rows(t, rows);
    }
    std::vector<Tensor> subj_E;
    for (const auto& s : bundle.subjects) subj_E.push_back(s.E);
    subj_E.push_back(bundle.background.E);

    auto temb = time2.forward(t, silu(t, time1.forward(t, sinusoidal_features(lambda_cond,
                                                                              cfg.time_dim))));

    auto sides = cfg.block_sides(hw_side);
    int oh = 0, ow = 0;
    auto z = conv3x3(t, scale(t, z_t, in_scale), hw_side, hw_side, conv_in, 1, oh, ow);

    DenoiseOutput out;
    Tensor skip0;
    RoutingMapsLayer prev_maps;
    bool have_prev = false;

    for (int b = 0; b < cfg.n_blocks(); b++) {
        int side = sides[static_cast<size_t>(b)];
        // resolution transitions
        if (b == 1) {
            z = conv3x3(t, z, sides[0], sides[0], down, 2, oh, ow);
        } else if (b == 3) {
            z = upsample2x(t, z, sides[2], sides[2]);
            z = conv3x3(t, z, sides[0], sides[0], up_conv, 1, oh, ow);
            z = concat_cols(t, {z, skip0});
        }
        const auto& blk = blocks[static_cast<size_t>(b)];
        z = res[static_cast<size_t>(b)].forward(t, z, side, side, temb);

        // self-attention, with routed reference injection from block 1 on
        Tensor self_out;
        {
            auto zn = blk.self.ln_self.forward(t, z);
            std::vector<Tensor> g_feats;
            Tensor subj_maps;
            if (b > 0 && have_prev && n_subj > 0) {
                bool all_have = true;
                for (const auto& s : bundle.subjects) {
                    all_have = all_have && static_cast<int>(s.G.size()) == cfg.n_blocks();
                }
                if (all_have) {
                    for (const auto& s : bundle.subjects) g_feats.push_back(s.G[static_cast<size_t>(b)]);
                    auto subj_rows = slice_rows(t, prev_maps.hard, 0, n_subj);
                    subj_maps = resample_rows_nearest(t, subj_rows, prev_maps.h, prev_maps.w,
                                                      side, side);
                }
            }
            ReferenceAttnParams rp{&blk.self.q, &blk.self.k, &blk.self.v,
                                   blk.has_ref ? &blk.ref_k : nullptr,
                                   blk.has_ref ? &blk.ref_v : nullptr, cfg.heads};
            if (!blk.has_ref) {
                g_feats.clear();
                subj_maps = nullptr;
            }
            self_out = routed_reference_attention(t, zn, g_feats, subj_maps, rp, bundle.gamma,
                                                  opt.router.mode == HardenMode::train);
            z = add(t, z, blk.self.o.forward(t, self_out));
        }
        check_finite(z, ("denoiser block " + std::to_string(b) + " self-attn").c_str());

        // router maps from the current stream, before injection
        RoutingMapsLayer ml;
        if (opt.override_mode == RoutingOverride::none) {
            ml = router.compute_maps(t, b, tokens, z, side, side, opt.router);
        } else {
            ml = forced_maps(n_subj, side, side, opt.override_mode, opt.gt_masks, opt.gt_h,
                             opt.gt_w);
        }

        // routed subject cross-attention (text + concept tokens)
        {
            auto zn = blk.ln_cross.forward(t, z);
            SubjectAttnParams sp{&blk.cross_q, &blk.text_k, &blk.text_v, &blk.subj_k,
                                 &blk.subj_v, cfg.heads};
            auto cross = routed_subject_attention(t, zn, bundle.text, subj_E, ml.hard, sp,
                                                  bundle.eta);
            z = add(t, z, blk.cross_o.forward(t, cross));
        }
        check_finite(z, ("denoiser block " + std::to_string(b) + " cross-attn").c_str());

        // FFN
        {
            auto zn = blk.self.ln_ffn.forward(t, z);
            z = add(t, z, blk.self.f2.forward(t, silu(t, blk.self.f1.forward(t, zn))));
        }

        prev_maps = ml;
        have_prev = true;
        out.maps.push_back(std::move(ml));
        if (b == 0) skip0 = z;
    }

    auto zo = silu(t, ln_out.forward(t, z));
    auto u = conv3x3(t, zo, sides[3], sides[3], conv_out, 1, oh, ow);
    u = add(t, u, in_skip.forward(t, scale(t, z_t, in_scale)));
    out.eps = add_scaled(t, scale(t, z_t, out_z), u, out_u);
    check_finite(out.eps, "denoiser output");
    return out;
}
