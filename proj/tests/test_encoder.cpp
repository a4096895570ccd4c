// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "glyphroute/model.hpp"

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.image_size = 32;
    cfg.ref_size = 16;
    cfg.patch = 4;
    cfg.base_channels = 16;
    cfg.mid_channels = 24;
    cfg.attn_dim = 16;
    cfg.heads = 2;
    cfg.text_dim = 16;
    cfg.concept_tokens = 8;
    cfg.concept_width = 16;
    cfg.concept_patch = 4;
    cfg.concept_layers = 2;
    cfg.qformer_layers = 2;
    cfg.routing_dim = 8;
    cfg.time_dim = 16;
    return cfg;
}

}  // namespace

TEST_CASE("concept tokens: shape, determinism, segmented-input equivalence") {
    Model m = Model::create(ModelConfig{}, 7);
    auto ref = render_reference(spec_from_identity(21), 3, false);
    Tape t;
    t.enabled = false;

    auto e1 = m.encode_concept(t, ref.image);
    CHECK(e1->rows == 64);  // m = 64
    CHECK(e1->cols == m.cfg.text_dim);

    auto e2 = m.encode_concept(t, ref.image);
    CHECK(e1->v == e2->v);

    // Whitening the background of an unsegmented composite reproduces the
    // segmented reference input, hence identical tokens.
    Image composite = ref.image;
    for (int y = 0; y < composite.h; y++) {
        for (int x = 0; x < composite.w; x++) {
            if (ref.mask[static_cast<size_t>(y) * composite.w + x] < 0.5) {
                for (int c = 0; c < 3; c++) composite.at(y, x, c) = 0.31;  // fake background
            }
        }
    }
    Image resegmented = composite;
    for (int y = 0; y < composite.h; y++) {
        for (int x = 0; x < composite.w; x++) {
            if (ref.mask[static_cast<size_t>(y) * composite.w + x] < 0.5) {
                for (int c = 0; c < 3; c++) resegmented.at(y, x, c) = 1.0;
            }
        }
    }
    auto e3 = m.encode_concept(t, resegmented);
    CHECK(e1->v == e3->v);
}

TEST_CASE("background concept equals the zero-image encoding and is stable") {
    Model m = Model::create(tiny_config(), 3);
    Tape t;
    t.enabled = false;
    auto bg1 = m.background_concept(t);
    auto bg2 = m.background_concept(t);
    CHECK(bg1->v == bg2->v);
    auto direct = m.encode_concept(t, zero_reference_image(m.cfg));
    CHECK(bg1->v == direct->v);
    CHECK(bg1->rows == m.cfg.concept_tokens);
    CHECK(bg1->cols == m.cfg.text_dim);
}

TEST_CASE("detail features: one set per self-attention layer minus the first") {
    Model m = Model::create(tiny_config(), 4);
    auto ref = render_reference(spec_from_identity(2), 5, false,
                                SceneConfig{32, 16, 4, 32, 0.01});
    Tape t;
    t.enabled = false;
    auto sets = m.detail_feature_sets(t, ref);
    CHECK(static_cast<int>(sets.size()) == m.cfg.n_blocks() - 1);  // L-1

    auto chans = m.cfg.block_channels();
    auto sides = m.cfg.block_sides(m.cfg.ref_latent_hw());
    for (size_t i = 0; i < sets.size(); i++) {
        CHECK(sets[i]->cols == chans[i + 1]);
        CHECK(sets[i]->rows == sides[i + 1] * sides[i + 1]);
    }
}

TEST_CASE("zero input propagates to exactly zero detail features at init") {
    Model m = Model::create(tiny_config(), 5);
    // zero image with zero mask channel: the all-zero encoder input
    ReferencePack zero;
    zero.image = zero_reference_image(m.cfg);
    zero.mask.assign(static_cast<size_t>(m.cfg.ref_size) * m.cfg.ref_size, 0.0);
    Tape t;
    t.enabled = false;
    auto sets = m.encode_detail_features(t, zero);
    for (const auto& g : sets) {
        for (double v : g->v) CHECK(v == 0.0);
    }
}

TEST_CASE("parameter census: simplified < full, difference enumerable") {
    ModelConfig cfg = tiny_config();
    size_t simplified = detail_encoder_param_count(cfg, false);
    size_t full = detail_encoder_param_count(cfg, true);
    CHECK(simplified < full);

    // census is deterministic
    CHECK(simplified == detail_encoder_param_count(cfg, false));
    CHECK(full == detail_encoder_param_count(cfg, true));

    // independent enumeration of the removed cross-attention pieces:
    // per block: LayerNorm(c) twice (gamma+beta), q: c*d+d, k: dc*d+d,
    // v: dc*d+d, o: d*c+c
    size_t expected_diff = 0;
    auto chans = cfg.block_channels();
    for (int b = 0; b < cfg.n_blocks(); b++) {
        size_t c = static_cast<size_t>(chans[static_cast<size_t>(b)]);
        size_t d = static_cast<size_t>(cfg.attn_dim);
        size_t dc = static_cast<size_t>(cfg.text_dim);
        expected_diff += 2 * c;                 // layernorm gamma + beta
        expected_diff += c * d + d;             // q
        expected_diff += dc * d + d;            // k
        expected_diff += dc * d + d;            // v
        expected_diff += d * c + c;             // o
    }
    CHECK(full - simplified == expected_diff);
}

TEST_CASE("detail encoder initializes from matching denoiser weights") {
    Model m = Model::create(tiny_config(), 6);
    // spot-check one mirrored tensor name
    const auto* det = m.reg.find("detail.b1.self.q.w");
    const auto* den = m.reg.find("denoiser.b1.self.q.w");
    REQUIRE(det != nullptr);
    REQUIRE(den != nullptr);
    CHECK(det->t->v == den->t->v);
    // conv_in differs in shape (mask channel) and is not copied
    const auto* det_in = m.reg.find("detail.conv_in.w");
    const auto* den_in = m.reg.find("denoiser.conv_in.w");
    REQUIRE(det_in != nullptr);
    REQUIRE(den_in != nullptr);
    CHECK(det_in->t->rows != den_in->t->rows);
}

TEST_CASE("subject encoding bundles concept, detail, and routing pieces") {
    Model m = Model::create(tiny_config(), 8);
    SceneConfig scf{32, 16, 4, 32, 0.01};
    auto ref = render_reference(spec_from_identity(11), 2, false, scf);
    Tape t;
    t.enabled = false;
    auto enc = m.encode_subject(t, ref);
    CHECK(enc.E->rows == m.cfg.concept_tokens);
    CHECK(enc.R->rows == 1);
    CHECK(enc.R->cols == m.cfg.routing_dim);
    CHECK(enc.G.size() == static_cast<size_t>(m.cfg.n_blocks()));
    CHECK(enc.identity_id == ref.identity_id);
}
