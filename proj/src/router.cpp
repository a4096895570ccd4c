// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#include "glyphroute/router.hpp"

#include <cmath>

#include "glyphroute/errors.hpp"
#include "glyphroute/serialize.hpp"

namespace {

// Train-mode attention masking scale: large enough that masked positions get
// ~1e-13 weight, small enough that straight-through gradients stay sane.
// Eval paths use 1e30, which underflows to an exact zero weight.
constexpr double kTrainMaskBias = 30.0;
constexpr double kEvalMaskBias = 1e30;

}  // namespace

Tensor harden(Tape& t, const Tensor& soft_maps, HardenMode mode, double temperature,
              Rng* gumbel_rng) {
    int rows = soft_maps->rows, cols = soft_maps->cols;
    if (mode == HardenMode::eval) {
        auto hard = make_tensor(rows, cols);
        for (int j = 0; j < cols; j++) {
            int best = 0;
            double best_v = soft_maps->at(0, j);
            for (int i = 1; i < rows; i++) {
                if (soft_maps->at(i, j) > best_v) {  // ties keep the lowest index
                    best_v = soft_maps->at(i, j);
                    best = i;
                }
            }
            hard->at(best, j) = 1.0;
        }
        return hard;
    }

    GR_CHECK(gumbel_rng != nullptr, ConfigError, "harden: train mode needs a gumbel rng");
    GR_CHECK(temperature > 0.0, ConfigError, "harden: temperature must be positive");
    // Gumbel-softmax on log-probabilities; softmax shift-invariance makes
    // log(softmax(l)) interchangeable with the raw logits.
    auto noise = make_tensor(rows, cols);
    for (auto& v : noise->v) v = gumbel_rng->gumbel();
    auto perturbed = scale(t, add(t, log_eps(t, soft_maps), noise), 1.0 / temperature);
    auto soft_g = softmax_cols_perm_invariant(t, perturbed);

    // Straight-through: hard one-hot forward, soft gradient backward.
    auto offset = make_tensor(rows, cols);
    for (int j = 0; j < cols; j++) {
        int best = 0;
        double best_v = soft_g->at(0, j);
        for (int i = 1; i < rows; i++) {
            if (soft_g->at(i, j) > best_v) {
                best_v = soft_g->at(i, j);
                best = i;
            }
        }
        for (int i = 0; i < rows; i++) {
            offset->at(i, j) = (i == best ? 1.0 : 0.0) - soft_g->at(i, j);
        }
    }
    return add(t, soft_g, offset);
}

Tensor routing_loss(Tape& t, const std::vector<RoutingMapsLayer>& layers,
                    const std::vector<std::vector<double>>& gt_masks, int image_h,
                    int image_w, double lambda) {
    int n = static_cast<int>(gt_masks.size());
    if (n == 0 || layers.empty()) return make_tensor(1, 1);

    Tensor total;
    for (const auto& layer : layers) {
        GR_CHECK(layer.subjects == n, ShapeError, "routing_loss: subject count mismatch");
        Tensor acc;
        for (int i = 0; i < n; i++) {
            auto gt = resample_nearest(gt_masks[i], image_h, image_w, layer.h, layer.w);
            auto gt_row = tensor_from(1, layer.h * layer.w, gt);
            auto mi = slice_rows(t, layer.soft, i, 1);
            auto term = sum_all(t, square(t, sub(t, mi, gt_row)));
            acc = acc ? add(t, acc, term) : term;
        }
        auto layer_loss = scale(t, acc, lambda / n);
        total = total ? add(t, total, layer_loss) : layer_loss;
    }
    return scale(t, total, 1.0 / static_cast<double>(layers.size()));
}

Router Router::create(ParamRegistry& reg, int trunk_width, int routing_dim,
                      int qformer_layers, const std::vector<int>& layer_channels, Rng& rng) {
    Router r;
    r.routing_dim = routing_dim;
    const ParamGroup G = ParamGroup::router;
    r.query = reg.add("router.qf.query", G, randn_tensor(1, routing_dim, rng, 0.5));
    r.feat_proj = Linear::create(reg, "router.qf.feat", G, trunk_width, routing_dim, rng);
    for (int l = 0; l < qformer_layers; l++) {
        std::string p = "router.qf.l" + std::to_string(l) + ".";
        QLayer q;
        q.ln1 = LayerNorm::create(reg, p + "ln1", G, routing_dim);
        q.sq = Linear::create(reg, p + "sq", G, routing_dim, routing_dim, rng);
        q.sk = Linear::create(reg, p + "sk", G, routing_dim, routing_dim, rng);
        q.sv = Linear::create(reg, p + "sv", G, routing_dim, routing_dim, rng);
        q.so = Linear::create(reg, p + "so", G, routing_dim, routing_dim, rng);
        q.ln2 = LayerNorm::create(reg, p + "ln2", G, routing_dim);
        q.cq = Linear::create(reg, p + "cq", G, routing_dim, routing_dim, rng);
        q.ck = Linear::create(reg, p + "ck", G, routing_dim, routing_dim, rng);
        q.cv = Linear::create(reg, p + "cv", G, routing_dim, routing_dim, rng);
        q.co = Linear::create(reg, p + "co", G, routing_dim, routing_dim, rng);
        q.ln3 = LayerNorm::create(reg, p + "ln3", G, routing_dim);
        q.f1 = Linear::create(reg, p + "f1", G, routing_dim, 2 * routing_dim, rng);
        q.f2 = Linear::create(reg, p + "f2", G, 2 * routing_dim, routing_dim, rng);
        r.qlayers.push_back(std::move(q));
    }
    for (size_t l = 0; l < layer_channels.size(); l++) {
        std::string p = "router.l" + std::to_string(l) + ".";
        int c = layer_channels[l];
        RouterLayer rl;
        rl.coarse_z = Linear::create(reg, p + "coarse_z", G, c, routing_dim, rng);
        rl.coarse_r = Linear::create(reg, p + "coarse_r", G, routing_dim, routing_dim, rng);
        rl.refine_q = Linear::create(reg, p + "refine_q", G, routing_dim, routing_dim, rng);
        rl.refine_k = Linear::create(reg, p + "refine_k", G, c, routing_dim, rng);
        rl.refine_v = Linear::create(reg, p + "refine_v", G, c, routing_dim, rng);
        rl.refine_o = Linear::create(reg, p + "refine_o", G, routing_dim, routing_dim, rng, true);
        rl.mlp1 = Linear::create(reg, p + "mlp1", G, routing_dim, 2 * routing_dim, rng);
        rl.mlp2 = Linear::create(reg, p + "mlp2", G, 2 * routing_dim, routing_dim, rng, true);
        rl.final_z = Linear::create(reg, p + "final_z", G, c, routing_dim, rng);
        rl.final_r = Linear::create(reg, p + "final_r", G, routing_dim, routing_dim, rng);
        r.layers.push_back(std::move(rl));
    }
    return r;
}

Tensor Router::routing_token(Tape& t, const Tensor& trunk_features) const {
    auto feats = feat_proj.forward(t, trunk_features);
    auto q = query;
    for (const auto& l : qlayers) {
        // single-query self path degenerates to a gated linear update
        auto qn = l.ln1.forward(t, q);
        auto self_out = multihead_attention(t, l.sq.forward(t, qn), l.sk.forward(t, qn),
                                            l.sv.forward(t, qn), 1);
        q = add(t, q, l.so.forward(t, self_out));
        auto qn2 = l.ln2.forward(t, q);
        auto cross = multihead_attention(t, l.cq.forward(t, qn2), l.ck.forward(t, feats),
                                         l.cv.forward(t, feats), 1);
        q = add(t, q, l.co.forward(t, cross));
        auto qn3 = l.ln3.forward(t, q);
        q = add(t, q, l.f2.forward(t, silu(t, l.f1.forward(t, qn3))));
    }
    return q;
}

Tensor Router::coarse_logits(Tape& t, int layer, const Tensor& tokens, const Tensor& z) const {
    const auto& rl = layers.at(static_cast<size_t>(layer));
    auto r_proj = rl.coarse_r.forward(t, tokens);      // (N+1) x d_r
    auto z_proj = rl.coarse_z.forward(t, z);           // hw x d_r
    auto logits = matmul(t, r_proj, z_proj, false, true);  // (N+1) x hw
    return scale(t, logits, 1.0 / std::sqrt(static_cast<double>(routing_dim)));
}

Tensor Router::refine_maps(Tape& t, int layer, const Tensor& tokens, const Tensor& z,
                           const Tensor& coarse_soft, const RouterOptions& opt) const {
    const auto& rl = layers.at(static_cast<size_t>(layer));
    int n_tokens = tokens->rows;
    int hw = z->rows;

    // Hard regions for the attention mask come from the coarse maps. In
    // train mode the straight-through estimator lets the mask carry gradient
    // back into the coarse projections.
    Tensor coarse_hard = harden(t, coarse_soft, opt.mode, opt.gumbel_temperature,
                                opt.gumbel_rng);

    auto keys = rl.refine_k.forward(t, z);
    auto vals = rl.refine_v.forward(t, z);

    std::vector<Tensor> refined_rows;
    refined_rows.reserve(static_cast<size_t>(n_tokens));
    for (int i = 0; i < n_tokens; i++) {
        auto token = slice_rows(t, tokens, i, 1);
        auto region = slice_rows(t, coarse_hard, i, 1);  // 1 x hw

        bool empty = true;
        for (int u = 0; u < hw; u++) {
            if (region->v[u] > 0.5) {
                empty = false;
                break;
            }
        }
        Tensor bias;  // 1 x hw additive logit bias
        if (empty) {
            bias = nullptr;  // fallback: unmasked attention
        } else if (opt.mode == HardenMode::eval) {
            auto b = make_tensor(1, hw);
            for (int u = 0; u < hw; u++) b->v[u] = region->v[u] > 0.5 ? 0.0 : -kEvalMaskBias;
            bias = b;
        } else {
            auto ones = full_tensor(1, hw, 1.0);
            bias = scale(t, sub(t, region, ones), kTrainMaskBias);
        }

        auto q = rl.refine_q.forward(t, token);
        auto attn = multihead_attention(t, q, keys, vals, 1, bias);
        auto tok = add(t, token, rl.refine_o.forward(t, attn));
        tok = add(t, tok, rl.mlp2.forward(t, silu(t, rl.mlp1.forward(t, tok))));
        refined_rows.push_back(tok);
    }
    auto refined = concat_rows(t, refined_rows);

    auto r_proj = rl.final_r.forward(t, refined);
    auto z_proj = rl.final_z.forward(t, z);
    auto logits = scale(t, matmul(t, r_proj, z_proj, false, true),
                        1.0 / std::sqrt(static_cast<double>(routing_dim)));
    return softmax_cols_perm_invariant(t, logits);
}

RoutingMapsLayer Router::compute_maps(Tape& t, int layer, const Tensor& tokens,
                                      const Tensor& z, int h, int w,
                                      const RouterOptions& opt) const {
    GR_CHECK(z->rows == h * w, ShapeError, "compute_maps: spatial size mismatch");
    RoutingMapsLayer out;
    out.h = h;
    out.w = w;
    out.subjects = tokens->rows - 1;
    auto coarse_soft = softmax_cols_perm_invariant(t, coarse_logits(t, layer, tokens, z));
    out.soft = refine_maps(t, layer, tokens, z, coarse_soft, opt);
    out.hard = harden(t, out.soft, opt.mode, opt.gumbel_temperature, opt.gumbel_rng);
    return out;
}

void RoutingTrace::save(const std::string& path) const {
    TensorArchive ar;
    auto meta_entries = nlohmann::json::array();
    for (size_t i = 0; i < entries.size(); i++) {
        const auto& e = entries[i];
        meta_entries.push_back({{"step", e.step},
                                {"substep", e.substep},
                                {"layer", e.layer},
                                {"h", e.h},
                                {"w", e.w},
                                {"subjects", e.subjects}});
        std::string base = "e" + std::to_string(i);
        ar.put(base + ".soft", tensor_from(e.subjects + 1, e.h * e.w, e.soft));
        ar.put(base + ".hard", tensor_from(e.subjects + 1, e.h * e.w, e.hard));
    }
    ar.meta = {{"format", "glyphroute-trace-v1"}, {"entries", meta_entries}};
    ar.save(path, ArchiveDtype::f32);
}

RoutingTrace RoutingTrace::load(const std::string& path) {
    auto ar = TensorArchive::load(path);
    GR_CHECK(ar.meta.value("format", "") == "glyphroute-trace-v1", IoError,
             "not a routing trace archive: " + path);
    RoutingTrace trace;
    const auto& metas = ar.meta.at("entries");
    for (size_t i = 0; i < metas.size(); i++) {
        const auto& m = metas[i];
        RoutingTraceEntry e;
        e.step = m.at("step");
        e.substep = m.at("substep");
        e.layer = m.at("layer");
        e.h = m.at("h");
        e.w = m.at("w");
        e.subjects = m.at("subjects");
        std::string base = "e" + std::to_string(i);
        e.soft = ar.get(base + ".soft")->v;
        e.hard = ar.get(base + ".hard")->v;
        trace.entries.push_back(std::move(e));
    }
    return trace;
}
