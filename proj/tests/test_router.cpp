// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "glyphroute/model.hpp"
#include "oracles.hpp"

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

SceneConfig tiny_scene() { return SceneConfig{32, 16, 4, 32, 0.01}; }

}  // namespace

TEST_CASE("routing token: determinism, dimension, canonical background token") {
    Model m = Model::create(tiny_config(), 11);
    Tape t;
    t.enabled = false;
    auto ref = render_reference(spec_from_identity(7), 4, false, tiny_scene());
    auto r1 = m.routing_token_for(t, ref.image);
    auto r2 = m.routing_token_for(t, ref.image);
    CHECK(r1->v == r2->v);
    CHECK(r1->rows == 1);
    CHECK(r1->cols == m.cfg.routing_dim);

    auto bg1 = m.routing_token_for(t, zero_reference_image(m.cfg));
    auto bg2 = m.routing_token_for(t, zero_reference_image(m.cfg));
    CHECK(bg1->v == bg2->v);
    CHECK(bg1->v != r1->v);
}

TEST_CASE("coarse maps: hand-computed case, symmetry, single-token case") {
    // Directly exercise the projected-inner-product + column softmax
    // construction on a wired-up two-token example.
    Tape t;
    t.enabled = false;

    // hand case: logits column u0 = (10, 0), elsewhere (0, 0)
    auto logits = make_tensor(2, 3);
    logits->at(0, 0) = 10.0;
    auto soft = softmax_cols_perm_invariant(t, logits);
    // softmax(10, 0): dominant weight ~ 1/(1+e^-10)
    CHECK(soft->at(0, 0) == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(soft->at(1, 0) == doctest::Approx(0.0).epsilon(1e-3));
    for (int j = 1; j < 3; j++) {
        CHECK(soft->at(0, j) == doctest::Approx(0.5).epsilon(1e-12));
    }

    // identical tokens -> uniform maps through the real router path
    Model m = Model::create(tiny_config(), 12);
    int hw = 16;
    Rng rng(5);
    auto z = randn_tensor(hw, m.cfg.base_channels, rng, 1.0);
    auto token = randn_tensor(1, m.cfg.routing_dim, rng, 1.0);
    auto tokens = concat_rows(t, {token, token, token});
    auto cl = m.router.coarse_logits(t, 0, tokens, z);
    auto cs = softmax_cols_perm_invariant(t, cl);
    for (int u = 0; u < hw; u++) {
        for (int i = 0; i < 3; i++) {
            CHECK(cs->at(i, u) == doctest::Approx(1.0 / 3).epsilon(1e-12));
        }
    }

    // N = 0: only the background token; its map is identically one
    auto solo = m.router.coarse_logits(t, 0, token, z);
    auto solo_soft = softmax_cols_perm_invariant(t, solo);
    for (int u = 0; u < hw; u++) CHECK(solo_soft->at(0, u) == 1.0);
}

TEST_CASE("refinement preserves argmax under identity-preserving projections") {
    // tiny 2-token / 4-position case: copy the coarse projections into the
    // final ones; refine_o and mlp2 are zero-initialized, so refinement
    // starts as the identity on tokens.
    ModelConfig cfg = tiny_config();
    Model m = Model::create(cfg, 13);
    auto& rl = m.router.layers[0];
    rl.final_r.w->v = rl.coarse_r.w->v;
    rl.final_r.b->v = rl.coarse_r.b->v;
    rl.final_z.w->v = rl.coarse_z.w->v;
    rl.final_z.b->v = rl.coarse_z.b->v;

    Tape t;
    t.enabled = false;
    Rng rng(6);
    auto z = randn_tensor(4, cfg.base_channels, rng, 1.0);
    auto tokens = randn_tensor(2, cfg.routing_dim, rng, 1.0);

    RouterOptions opt;
    opt.mode = HardenMode::eval;
    auto coarse = softmax_cols_perm_invariant(t, m.router.coarse_logits(t, 0, tokens, z));
    auto refined = m.router.refine_maps(t, 0, tokens, z, coarse, opt);

    for (int u = 0; u < 4; u++) {
        int coarse_arg = coarse->at(0, u) >= coarse->at(1, u) ? 0 : 1;
        int refined_arg = refined->at(0, u) >= refined->at(1, u) ? 0 : 1;
        CHECK(coarse_arg == refined_arg);
        // columns sum to one
        CHECK(refined->at(0, u) + refined->at(1, u) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("empty-region tokens fall back to unmasked attention and stay finite") {
    ModelConfig cfg = tiny_config();
    Model m = Model::create(cfg, 14);
    Tape t;
    t.enabled = false;
    Rng rng(7);
    auto z = randn_tensor(9, cfg.base_channels, rng, 1.0);
    // construct coarse maps where token 1 owns every position
    auto coarse = make_tensor(2, 9);
    for (int u = 0; u < 9; u++) {
        coarse->at(0, u) = 0.9;
        coarse->at(1, u) = 0.1;
    }
    auto tokens = randn_tensor(2, cfg.routing_dim, rng, 1.0);
    RouterOptions opt;
    opt.mode = HardenMode::eval;
    auto refined = m.router.refine_maps(t, 0, tokens, z, coarse, opt);
    for (double v : refined->v) CHECK(std::isfinite(v));
}

TEST_CASE("harden: argmax, tie break, gumbel straight-through gradient") {
    Tape t;

    // eval argmax per position (columns), tokens on rows
    auto maps = tensor_from(3, 2, {0.6, 0.2, 0.3, 0.5, 0.1, 0.3});
    auto hard = harden(t, maps, HardenMode::eval);
    CHECK(hard->at(0, 0) == 1.0);  // position 0 -> token 0
    CHECK(hard->at(1, 1) == 1.0);  // position 1 -> token 1
    // partition: one 1 per column
    for (int j = 0; j < 2; j++) {
        double s = 0;
        for (int i = 0; i < 3; i++) s += hard->at(i, j);
        CHECK(s == 1.0);
    }

    // exact tie goes to the lower index
    auto tie = tensor_from(2, 1, {0.5, 0.5});
    auto tie_hard = harden(t, tie, HardenMode::eval);
    CHECK(tie_hard->at(0, 0) == 1.0);
    CHECK(tie_hard->at(1, 0) == 0.0);

    // train mode: one-hot forward; gradient matches central finite
    // differences of the soft gumbel relaxation (frozen noise)
    auto logits = tensor_from(3, 2, {0.2, -0.4, 0.9, 0.1, -0.3, 0.5});
    logits->rg = true;
    auto weights = tensor_from(3, 2, {1.0, -2.0, 0.5, 1.5, -1.0, 2.0});
    weights->rg = false;

    double temperature = 0.7;
    auto run = [&](Tape& tape, uint64_t noise_seed) {
        Rng grng(noise_seed);
        auto soft = softmax_cols_perm_invariant(tape, logits);
        auto st = harden(tape, soft, HardenMode::train, temperature, &grng);
        return sum_all(tape, mul(tape, st, weights));
    };

    Tape tape;
    logits->ensure_grad();
    logits->zero_grad();
    auto loss = run(tape, 99);
    // forward output is exactly one-hot per column
    tape.backward(loss);

    double h = 1e-6;
    for (size_t i = 0; i < logits->size(); i++) {
        double orig = logits->v[i];
        // soft-path objective with the same frozen gumbel noise: replace the
        // straight-through output by the soft relaxation
        auto soft_loss = [&](double val) {
            logits->v[i] = val;
            Tape t2;
            t2.enabled = false;
            Rng grng(99);
            auto soft = softmax_cols_perm_invariant(t2, logits);
            auto noise = make_tensor(3, 2);
            for (auto& nv : noise->v) nv = grng.gumbel();
            auto pert = scale(t2, add(t2, log_eps(t2, soft), noise), 1.0 / temperature);
            auto soft_g = softmax_cols_perm_invariant(t2, pert);
            auto weighted = mul(t2, soft_g, weights);
            return sum_all(t2, weighted)->v[0];
        };
        double fp = soft_loss(orig + h);
        double fm = soft_loss(orig - h);
        logits->v[i] = orig;
        double fd = (fp - fm) / (2 * h);
        double ad = logits->g[i];
        double denom = std::max({1e-8, std::fabs(fd), std::fabs(ad)});
        CHECK(std::fabs(fd - ad) / denom < 1e-4);
    }
}

TEST_CASE("routing loss: trivial values and double-loop oracle") {
    Tape t;

    // M = gt exactly -> 0
    RoutingMapsLayer layer;
    layer.h = 2;
    layer.w = 2;
    layer.subjects = 1;
    layer.soft = tensor_from(2, 4, {1, 0, 0, 0, 0, 1, 1, 1});
    layer.hard = clone_tensor(layer.soft);
    std::vector<std::vector<double>> gt = {{1, 0, 0, 0}};
    auto zero_loss = routing_loss(t, {layer}, gt, 2, 2, 0.1);
    CHECK(zero_loss->v[0] == 0.0);

    // N=1, hw=4, M=(1,0,0,0), gt=(0,1,0,0), lambda=0.1 -> 0.2
    std::vector<std::vector<double>> gt2 = {{0, 1, 0, 0}};
    auto l2 = routing_loss(t, {layer}, gt2, 2, 2, 0.1);
    CHECK(l2->v[0] == doctest::Approx(0.2).epsilon(1e-15));

    // lambda = 0 -> 0 regardless
    auto l3 = routing_loss(t, {layer}, gt2, 2, 2, 0.0);
    CHECK(l3->v[0] == 0.0);

    // N=0 -> 0 by convention
    auto l4 = routing_loss(t, {layer}, {}, 2, 2, 0.1);
    CHECK(l4->v[0] == 0.0);

    // oracle agreement on random multi-layer inputs
    Rng rng(17);
    for (int trial = 0; trial < 20; trial++) {
        int n_subj = 1 + static_cast<int>(rng.uniform_int(3));
        std::vector<RoutingMapsLayer> layers;
        for (int l = 0; l < 3; l++) {
            RoutingMapsLayer ml;
            ml.h = 2 + l;
            ml.w = 2 + l;
            ml.subjects = n_subj;
            auto logits = randn_tensor(n_subj + 1, ml.h * ml.w, rng, 1.0);
            ml.soft = softmax_cols_perm_invariant(t, logits);
            ml.hard = harden(t, ml.soft, HardenMode::eval);
            layers.push_back(ml);
        }
        std::vector<std::vector<double>> gts;
        for (int s = 0; s < n_subj; s++) {
            std::vector<double> g(36);
            for (auto& v : g) v = rng.uniform() < 0.3 ? 1.0 : 0.0;
            gts.push_back(g);
        }
        auto loss = routing_loss(t, layers, gts, 6, 6, 0.1);
        double naive = oracle::routing_loss(layers, gts, 6, 6, 0.1);
        CHECK(std::fabs(loss->v[0] - naive) <= 1e-12 * std::max(1.0, std::fabs(naive)));
    }
}

TEST_CASE("full-forward partition and bitwise reference-permutation equivariance") {
    ModelConfig cfg = tiny_config();
    Model m = Model::create(cfg, 15);
    SceneConfig scf = tiny_scene();
    std::vector<SubjectSpec> specs = {spec_from_identity(1), spec_from_identity(10),
                                      spec_from_identity(19)};
    auto scene = render_scene(specs, 3, 4, scf);
    std::vector<ReferencePack> refs;
    for (auto& s : specs) refs.push_back(render_reference(s, 9, false, scf));

    Tape t;
    t.enabled = false;
    auto z0 = m.codec.encode(scene.image);
    Rng rng(20);
    auto eps = randn_tensor(z0->rows, z0->cols, rng, 1.0);
    auto z_t = add_noise(z0, 400, eps, m.sched);

    ForwardOptions opt;
    opt.router.mode = HardenMode::eval;

    auto bundle = m.make_bundle(t, scene.caption, refs, 1.0, 0.0);
    auto out = m.forward(t, z_t, m.sched.lambda_for(400), bundle, opt);

    // partition at every layer
    for (const auto& ml : out.maps) {
        for (int u = 0; u < ml.h * ml.w; u++) {
            double s = 0;
            int ones = 0;
            for (int i = 0; i <= ml.subjects; i++) {
                s += ml.hard->at(i, u);
                ones += ml.hard->at(i, u) == 1.0;
            }
            CHECK(s == 1.0);
            CHECK(ones == 1);
        }
        // soft maps columns sum to 1
        for (int u = 0; u < ml.h * ml.w; u++) {
            double s = 0;
            for (int i = 0; i <= ml.subjects; i++) s += ml.soft->at(i, u);
            CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
        }
    }

    // permuting references permutes map rows bitwise, prediction unchanged
    std::vector<int> perm = {2, 0, 1};
    std::vector<ReferencePack> refs_p;
    for (int p : perm) refs_p.push_back(refs[static_cast<size_t>(p)]);
    auto bundle_p = m.make_bundle(t, scene.caption, refs_p, 1.0, 0.0);
    auto out_p = m.forward(t, z_t, m.sched.lambda_for(400), bundle_p, opt);

    REQUIRE(out_p.maps.size() == out.maps.size());
    for (size_t l = 0; l < out.maps.size(); l++) {
        const auto& a = out.maps[l];
        const auto& b = out_p.maps[l];
        for (int i = 0; i < 3; i++) {
            for (int u = 0; u < a.h * a.w; u++) {
                CHECK(b.soft->at(i, u) == a.soft->at(perm[static_cast<size_t>(i)], u));
                CHECK(b.hard->at(i, u) == a.hard->at(perm[static_cast<size_t>(i)], u));
            }
        }
        // background row unchanged
        for (int u = 0; u < a.h * a.w; u++) {
            CHECK(b.soft->at(3, u) == a.soft->at(3, u));
        }
    }
    CHECK(out_p.eps->v == out.eps->v);
}

TEST_CASE("decoupling: injection weights do not reach the router") {
    ModelConfig cfg = tiny_config();
    Model m = Model::create(cfg, 16);
    SceneConfig scf = tiny_scene();
    std::vector<SubjectSpec> specs = {spec_from_identity(2), spec_from_identity(11)};
    auto scene = render_scene(specs, 5, 6, scf);
    std::vector<ReferencePack> refs;
    for (auto& s : specs) refs.push_back(render_reference(s, 1, false, scf));

    Tape t;
    t.enabled = false;
    auto z0 = m.codec.encode(scene.image);
    Rng rng(21);
    auto eps = randn_tensor(z0->rows, z0->cols, rng, 1.0);
    auto z_t = add_noise(z0, 300, eps, m.sched);
    ForwardOptions opt;
    opt.router.mode = HardenMode::eval;

    auto bundle = m.make_bundle(t, scene.caption, refs, 1.0, 0.0);

    // (a) module-level: recompute maps on the captured streams after
    // perturbing every injection matrix; the router never touches them.
    // Capture the router inputs by re-running with identical weights.
    std::vector<Tensor> tokens_rows;
    for (const auto& s : bundle.subjects) tokens_rows.push_back(s.R);
    tokens_rows.push_back(bundle.background.R);
    auto tokens = concat_rows(t, tokens_rows);
    // build a probe stream and compute maps before/after perturbation
    auto probe = randn_tensor(16, cfg.base_channels, rng, 1.0);
    RouterOptions ropt;
    auto maps_before = m.router.compute_maps(t, 0, tokens, probe, 4, 4, ropt);
    for (auto& e : m.reg.entries()) {
        if (e.group == ParamGroup::inject) {
            for (auto& v : e.t->v) v += 0.37;
        }
    }
    auto maps_after = m.router.compute_maps(t, 0, tokens, probe, 4, 4, ropt);
    CHECK(maps_before.soft->v == maps_after.soft->v);
    CHECK(maps_before.hard->v == maps_after.hard->v);

    // (b) forward-level: every map is computed before its layer's subject
    // injection, so perturbing the last block's subject K/V cannot reach any
    // map; reference K/V at block 3 act in self-attention ahead of the final
    // maps and are left untouched.
    Model m2 = Model::create(cfg, 16);  // fresh identical model
    {
        // the output conv starts at zero; give it weight so injection
        // changes are visible in the prediction
        Rng wr(123);
        auto& w = m2.reg.find("denoiser.conv_out.w")->t;
        for (auto& v : const_cast<Tensor&>(w)->v) v = wr.gaussian() * 0.1;
    }
    Tape t2;
    t2.enabled = false;
    auto bundle2 = m2.make_bundle(t2, scene.caption, refs, 1.0, 0.0);
    auto before2 = m2.forward(t2, z_t, m2.sched.lambda_for(300), bundle2, opt);
    for (auto& e : m2.reg.entries()) {
        if (e.group == ParamGroup::inject && (e.name.find(".b3.subjk") != std::string::npos ||
                                              e.name.find(".b3.subjv") != std::string::npos)) {
            for (auto& v : e.t->v) v += 0.51;
        }
    }
    auto after2 = m2.forward(t2, z_t, m2.sched.lambda_for(300), bundle2, opt);
    REQUIRE(after2.maps.size() == before2.maps.size());
    for (size_t l = 0; l < before2.maps.size(); l++) {
        CHECK(after2.maps[l].soft->v == before2.maps[l].soft->v);
        CHECK(after2.maps[l].hard->v == before2.maps[l].hard->v);
    }
    CHECK(after2.eps->v != before2.eps->v);  // injection itself did change
}

TEST_CASE("segmentation output is a partition and permutes with references") {
    ModelConfig cfg = tiny_config();
    Model m = Model::create(cfg, 18);
    SceneConfig scf = tiny_scene();
    std::vector<SubjectSpec> specs = {spec_from_identity(3), spec_from_identity(12)};
    auto scene = render_scene(specs, 8, 9, scf);
    std::vector<ReferencePack> refs;
    for (auto& s : specs) refs.push_back(render_reference(s, 2, false, scf));

    auto masks = m.segment_by_reference(scene.image, refs, 2, 0);
    REQUIRE(masks.size() == 3);  // two subjects + background

    // background is the complement of the subject predictions
    for (size_t px = 0; px < masks[0].size(); px++) {
        double total = masks[0][px] + masks[1][px] + masks[2][px];
        CHECK(total == 1.0);
    }

    // permuting references permutes predicted masks identically
    auto swapped = m.segment_by_reference(scene.image, {refs[1], refs[0]}, 2, 0);
    CHECK(swapped[0] == masks[1]);
    CHECK(swapped[1] == masks[0]);
    CHECK(swapped[2] == masks[2]);
}

TEST_CASE("trace save/load round trip") {
    RoutingTrace trace;
    RoutingTraceEntry e;
    e.step = 1;
    e.substep = 0;
    e.layer = 2;
    e.h = 2;
    e.w = 2;
    e.subjects = 1;
    e.soft = {0.25, 0.5, 0.75, 1.0, 0.75, 0.5, 0.25, 0.0};
    e.hard = {0, 1, 1, 1, 1, 0, 0, 0};
    trace.entries.push_back(e);

    std::string path = "/tmp/glyphroute_trace_test.gra";
    trace.save(path);
    auto loaded = RoutingTrace::load(path);
    REQUIRE(loaded.entries.size() == 1);
    CHECK(loaded.entries[0].step == 1);
    CHECK(loaded.entries[0].layer == 2);
    // f32 storage: values survive within float precision
    for (size_t i = 0; i < e.soft.size(); i++) {
        CHECK(loaded.entries[0].soft[i] == doctest::Approx(e.soft[i]).epsilon(1e-6));
    }
}
