// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#include "glyphroute/encoder.hpp"

#include "glyphroute/errors.hpp"

ConceptEncoder ConceptEncoder::create(ParamRegistry& reg, const ModelConfig& cfg, Rng& rng) {
    ConceptEncoder e;
    e.width = cfg.concept_width;
    e.patch = cfg.concept_patch;
    e.ref_size = cfg.ref_size;
    e.heads = cfg.heads;
    const ParamGroup G = ParamGroup::concept_enc;
    int in_dim = 3 * cfg.concept_patch * cfg.concept_patch;
    e.patch_embed = Linear::create(reg, "concept.patch", G, in_dim, cfg.concept_width, rng);
    e.cls = reg.add("concept.cls", G, randn_tensor(1, cfg.concept_width, rng, 0.5));
    e.pos = reg.add("concept.pos", G,
                    randn_tensor(cfg.concept_patches() + 1, cfg.concept_width, rng, 0.02));
    for (int l = 0; l < cfg.concept_layers; l++) {
        std::string p = "concept.b" + std::to_string(l) + ".";
        Block b;
        b.ln1 = LayerNorm::create(reg, p + "ln1", G, cfg.concept_width);
        b.q = Linear::create(reg, p + "q", G, cfg.concept_width, cfg.concept_width, rng);
        b.k = Linear::create(reg, p + "k", G, cfg.concept_width, cfg.concept_width, rng);
        b.v = Linear::create(reg, p + "v", G, cfg.concept_width, cfg.concept_width, rng);
        b.o = Linear::create(reg, p + "o", G, cfg.concept_width, cfg.concept_width, rng);
        b.ln2 = LayerNorm::create(reg, p + "ln2", G, cfg.concept_width);
        b.f1 = Linear::create(reg, p + "f1", G, cfg.concept_width,
                              cfg.ffn_mult * cfg.concept_width, rng);
        b.f2 = Linear::create(reg, p + "f2", G, cfg.ffn_mult * cfg.concept_width,
                              cfg.concept_width, rng);
        e.blocks.push_back(std::move(b));
    }
    e.final_ln = LayerNorm::create(reg, "concept.ln", G, cfg.concept_width);
    return e;
}

Tensor ConceptEncoder::trunk_features(Tape& t, const Image& ref_image) const {
    GR_CHECK(ref_image.h == ref_size && ref_image.w == ref_size && ref_image.c == 3, ShapeError,
             "concept encoder: reference image size mismatch");
    int side = ref_size / patch;
    auto patches = make_tensor(side * side, 3 * patch * patch);
    for (int y = 0; y < side; y++) {
        for (int x = 0; x < side; x++) {
            double* cell = patches->row(y * side + x);
            int k = 0;
            for (int py = 0; py < patch; py++) {
                for (int px = 0; px < patch; px++) {
                    for (int c = 0; c < 3; c++) {
                        cell[k++] = ref_image.at(y * patch + py, x * patch + px, c);
                    }
                }
            }
        }
    }
    auto x = patch_embed.forward(t, patches);
    x = concat_rows(t, {cls, x});
    x = add(t, x, pos);
    for (const auto& b : blocks) {
        auto xn = b.ln1.forward(t, x);
        auto attn = multihead_attention(t, b.q.forward(t, xn), b.k.forward(t, xn),
                                        b.v.forward(t, xn), heads);
        x = add(t, x, b.o.forward(t, attn));
        auto xn2 = b.ln2.forward(t, x);
        x = add(t, x, b.f2.forward(t, silu(t, b.f1.forward(t, xn2))));
    }
    return final_ln.forward(t, x);
}

SubjectQFormer SubjectQFormer::create(ParamRegistry& reg, const ModelConfig& cfg, Rng& rng) {
    SubjectQFormer s;
    s.heads = cfg.heads;
    const ParamGroup G = ParamGroup::concept_enc;
    s.queries = reg.add("concept.qf.queries", G,
                        randn_tensor(cfg.concept_tokens, cfg.text_dim, rng, 0.5));
    s.feat_proj = Linear::create(reg, "concept.qf.feat", G, cfg.concept_width, cfg.text_dim,
                                 rng);
    for (int l = 0; l < cfg.qformer_layers; l++) {
        std::string p = "concept.qf.l" + std::to_string(l) + ".";
        Layer q;
        q.ln1 = LayerNorm::create(reg, p + "ln1", G, cfg.text_dim);
        q.sq = Linear::create(reg, p + "sq", G, cfg.text_dim, cfg.text_dim, rng);
        q.sk = Linear::create(reg, p + "sk", G, cfg.text_dim, cfg.text_dim, rng);
        q.sv = Linear::create(reg, p + "sv", G, cfg.text_dim, cfg.text_dim, rng);
        q.so = Linear::create(reg, p + "so", G, cfg.text_dim, cfg.text_dim, rng);
        q.ln2 = LayerNorm::create(reg, p + "ln2", G, cfg.text_dim);
        q.cq = Linear::create(reg, p + "cq", G, cfg.text_dim, cfg.text_dim, rng);
        q.ck = Linear::create(reg, p + "ck", G, cfg.text_dim, cfg.text_dim, rng);
        q.cv = Linear::create(reg, p + "cv", G, cfg.text_dim, cfg.text_dim, rng);
        q.co = Linear::create(reg, p + "co", G, cfg.text_dim, cfg.text_dim, rng);
        q.ln3 = LayerNorm::create(reg, p + "ln3", G, cfg.text_dim);
        q.f1 = Linear::create(reg, p + "f1", G, cfg.text_dim, cfg.ffn_mult * cfg.text_dim, rng);
        q.f2 = Linear::create(reg, p + "f2", G, cfg.ffn_mult * cfg.text_dim, cfg.text_dim, rng);
        s.layers.push_back(std::move(q));
    }
    return s;
}

Tensor SubjectQFormer::forward(Tape& t, const Tensor& trunk_features) const {
    auto feats = feat_proj.forward(t, trunk_features);
    auto q = queries;
    for (const auto& l : layers) {
        auto qn = l.ln1.forward(t, q);
        auto self_out = multihead_attention(t, l.sq.forward(t, qn), l.sk.forward(t, qn),
                                            l.sv.forward(t, qn), heads);
        q = add(t, q, l.so.forward(t, self_out));
        auto qn2 = l.ln2.forward(t, q);
        auto cross = multihead_attention(t, l.cq.forward(t, qn2), l.ck.forward(t, feats),
                                         l.cv.forward(t, feats), heads);
        q = add(t, q, l.co.forward(t, cross));
        auto qn3 = l.ln3.forward(t, q);
        q = add(t, q, l.f2.forward(t, silu(t, l.f1.forward(t, qn3))));
    }
    return q;
}

DetailEncoder DetailEncoder::create(ParamRegistry& reg, const ModelConfig& cfg, Rng& rng,
                                    bool with_cross, ParamGroup group) {
    DetailEncoder d;
    d.cfg = cfg;
    d.with_cross = with_cross;
    auto chans = cfg.block_channels();
    int cl = cfg.latent_channels() + 1;  // + subject mask channel
    std::string pre = with_cross ? "detailfull." : "detail.";

    d.conv_in = Linear::create(reg, pre + "conv_in", group, 9 * cl, chans[0], rng);
    d.down = Linear::create(reg, pre + "down", group, 9 * chans[0], chans[1], rng);
    d.up_conv = Linear::create(reg, pre + "up", group, 9 * chans[2], chans[3], rng);
    for (int b = 0; b < cfg.n_blocks(); b++) {
        std::string nm = pre + "b" + std::to_string(b);
        int cin = chans[b];
        if (b == 3) cin = chans[3] + chans[0];
        // No time conditioning: the encoder is a pure feature extractor, and
        // zero input then propagates to exactly-zero features at init.
        d.res.push_back(ResBlock::create(reg, nm + ".res", group, cin, chans[b], 0, rng));
        d.blocks.push_back(SelfFfn::create(reg, nm + ".self", group, chans[b], cfg.attn_dim,
                                           cfg.ffn_mult, rng));
        if (with_cross) {
            CrossPiece cp;
            cp.ln = LayerNorm::create(reg, nm + ".lnc", group, chans[b]);
            cp.q = Linear::create(reg, nm + ".crossq", group, chans[b], cfg.attn_dim, rng);
            cp.k = Linear::create(reg, nm + ".crossk", group, cfg.text_dim, cfg.attn_dim, rng);
            cp.v = Linear::create(reg, nm + ".crossv", group, cfg.text_dim, cfg.attn_dim, rng);
            cp.o = Linear::create(reg, nm + ".crosso", group, cfg.attn_dim, chans[b], rng);
            d.cross.push_back(std::move(cp));
        }
    }
    return d;
}

std::vector<Tensor> DetailEncoder::forward(Tape& t, const Tensor& f_vae) const {
    int side = cfg.ref_latent_hw();
    GR_CHECK(f_vae->rows == side * side && f_vae->cols == cfg.latent_channels() + 1, ShapeError,
             "detail encoder: input shape mismatch");
    auto sides = cfg.block_sides(side);
    int oh = 0, ow = 0;
    auto z = conv3x3(t, f_vae, side, side, conv_in, 1, oh, ow);

    std::vector<Tensor> hidden;
    Tensor skip0;
    for (int b = 0; b < cfg.n_blocks(); b++) {
        int s = sides[static_cast<size_t>(b)];
        if (b == 1) {
            z = conv3x3(t, z, sides[0], sides[0], down, 2, oh, ow);
        } else if (b == 3) {
            z = upsample2x(t, z, sides[2], sides[2]);
            z = conv3x3(t, z, sides[0], sides[0], up_conv, 1, oh, ow);
            z = concat_cols(t, {z, skip0});
        }
        z = res[static_cast<size_t>(b)].forward(t, z, s, s, nullptr);
        hidden.push_back(z);  // the self-attention layer's input hidden state

        const auto& blk = blocks[static_cast<size_t>(b)];
        auto zn = blk.ln_self.forward(t, z);
        auto attn = multihead_attention(t, blk.q.forward(t, zn), blk.k.forward(t, zn),
                                        blk.v.forward(t, zn), cfg.heads);
        z = add(t, z, blk.o.forward(t, attn));
        auto zn2 = blk.ln_ffn.forward(t, z);
        z = add(t, z, blk.f2.forward(t, silu(t, blk.f1.forward(t, zn2))));
        if (b == 0) skip0 = z;
    }
    return hidden;
}

Tensor detail_input(const ReferencePack& ref, const ModelConfig& cfg) {
    LatentCodec codec{cfg.ref_size, cfg.patch};
    auto z = codec.encode(ref.image);
    int side = cfg.ref_latent_hw();
    auto mask = resample_nearest(ref.mask, cfg.ref_size, cfg.ref_size, side, side);
    auto out = make_tensor(side * side, cfg.latent_channels() + 1);
    for (int r = 0; r < out->rows; r++) {
        const double* src = z->row(r);
        double* dst = out->row(r);
        for (int c = 0; c < cfg.latent_channels(); c++) dst[c] = src[c];
        dst[cfg.latent_channels()] = mask[static_cast<size_t>(r)] > 0.5 ? 1.0 : 0.0;
    }
    return out;
}

size_t detail_encoder_param_count(const ModelConfig& cfg, bool with_cross) {
    ParamRegistry scratch;
    Rng rng(0);
    DetailEncoder::create(scratch, cfg, rng, with_cross);
    return scratch.scalar_count();
}
