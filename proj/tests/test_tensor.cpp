// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "glyphroute/nn.hpp"
#include "glyphroute/tensor.hpp"

namespace {

// Central finite differences of a scalar-valued graph builder against the
// autograd gradient, over every coordinate of the listed inputs.
double max_grad_rel_err(const std::function<Tensor(Tape&)>& build,
                        const std::vector<Tensor>& inputs, double h = 1e-6) {
    for (const auto& in : inputs) {
        in->rg = true;
        in->ensure_grad();
        in->zero_grad();
    }
    Tape tape;
    auto loss = build(tape);
    tape.backward(loss);

    double worst = 0.0;
    for (const auto& in : inputs) {
        for (size_t i = 0; i < in->size(); i++) {
            double orig = in->v[i];
            Tape t1;
            t1.enabled = false;
            in->v[i] = orig + h;
            double fp = build(t1)->v[0];
            Tape t2;
            t2.enabled = false;
            in->v[i] = orig - h;
            double fm = build(t2)->v[0];
            in->v[i] = orig;
            double fd = (fp - fm) / (2 * h);
            double ad = in->g[i];
            double denom = std::max({1e-8, std::fabs(fd), std::fabs(ad)});
            worst = std::max(worst, std::fabs(fd - ad) / denom);
        }
    }
    return worst;
}

Tensor randn(int r, int c, Rng& rng, double s = 1.0) { return randn_tensor(r, c, rng, s); }

}  // namespace

TEST_CASE("elementwise and broadcast gradients") {
    Rng rng(42);
    auto a = randn(3, 4, rng);
    auto b = randn(3, 4, rng);
    auto rv = randn(1, 4, rng);
    auto cv = randn(3, 1, rng);

    CHECK(max_grad_rel_err([&](Tape& t) { return sum_all(t, mul(t, add(t, a, b), sub(t, a, b))); },
                           {a, b}) < 1e-7);
    CHECK(max_grad_rel_err([&](Tape& t) { return mean_all(t, square(t, add_rowvec(t, a, rv))); },
                           {a, rv}) < 1e-7);
    CHECK(max_grad_rel_err([&](Tape& t) { return sum_all(t, silu(t, mul_colvec(t, a, cv))); },
                           {a, cv}) < 1e-6);
    CHECK(max_grad_rel_err([&](Tape& t) { return sum_all(t, square(t, add_scaled(t, a, b, -2.5))); },
                           {a, b}) < 1e-7);
    CHECK(max_grad_rel_err([&](Tape& t) { return sum_all(t, square(t, scale(t, a, 3.0))); },
                           {a}) < 1e-7);
}

TEST_CASE("matmul gradients, all supported transpose combinations") {
    Rng rng(43);
    auto a = randn(3, 5, rng);
    auto b = randn(5, 2, rng);
    CHECK(max_grad_rel_err([&](Tape& t) { return sum_all(t, square(t, matmul(t, a, b))); },
                           {a, b}) < 1e-6);

    auto bt = randn(2, 5, rng);
    CHECK(max_grad_rel_err(
              [&](Tape& t) { return sum_all(t, square(t, matmul(t, a, bt, false, true))); },
              {a, bt}) < 1e-6);

    auto at = randn(5, 3, rng);
    CHECK(max_grad_rel_err(
              [&](Tape& t) { return sum_all(t, square(t, matmul(t, at, b, true, false))); },
              {at, b}) < 1e-6);
}

TEST_CASE("softmax gradients") {
    Rng rng(44);
    auto x = randn(4, 6, rng);
    auto w = randn(4, 6, rng);  // fixed weights give a non-symmetric loss
    w->rg = false;
    CHECK(max_grad_rel_err(
              [&](Tape& t) { return sum_all(t, mul(t, softmax_rows(t, x), w)); }, {x}) < 1e-6);

    auto m = randn(3, 8, rng);
    auto wm = randn(3, 8, rng);
    wm->rg = false;
    CHECK(max_grad_rel_err(
              [&](Tape& t) { return sum_all(t, mul(t, softmax_cols_perm_invariant(t, m), wm)); },
              {m}) < 1e-6);
}

TEST_CASE("softmax_cols_perm_invariant is bitwise equivariant under row permutation") {
    Rng rng(45);
    auto x = randn(5, 7, rng);
    Tape t;
    t.enabled = false;
    auto y = softmax_cols_perm_invariant(t, x);

    std::vector<int> perm = {3, 0, 4, 1, 2};
    auto xp = make_tensor(5, 7);
    for (int i = 0; i < 5; i++) {
        for (int j = 0; j < 7; j++) xp->at(i, j) = x->at(perm[i], j);
    }
    auto yp = softmax_cols_perm_invariant(t, xp);
    for (int i = 0; i < 5; i++) {
        for (int j = 0; j < 7; j++) {
            CHECK(yp->at(i, j) == y->at(perm[i], j));  // bitwise
        }
    }

    // Columns sum to 1.
    for (int j = 0; j < 7; j++) {
        double s = 0;
        for (int i = 0; i < 5; i++) s += y->at(i, j);
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("layernorm gradient") {
    Rng rng(46);
    auto x = randn(4, 8, rng);
    auto gamma = randn(1, 8, rng);
    auto beta = randn(1, 8, rng);
    auto w = randn(4, 8, rng);
    w->rg = false;
    CHECK(max_grad_rel_err(
              [&](Tape& t) {
                  return sum_all(t, mul(t, layernorm_rows(t, x, gamma, beta), w));
              },
              {x, gamma, beta}) < 1e-5);
}

TEST_CASE("shape op gradients") {
    Rng rng(47);
    auto a = randn(3, 4, rng);
    auto b = randn(2, 4, rng);
    auto c = randn(3, 2, rng);
    CHECK(max_grad_rel_err(
              [&](Tape& t) {
                  auto cat = concat_rows(t, {a, b});
                  auto sl = slice_rows(t, cat, 1, 3);
                  return sum_all(t, square(t, sl));
              },
              {a, b}) < 1e-7);
    CHECK(max_grad_rel_err(
              [&](Tape& t) {
                  auto cat = concat_cols(t, {a, c});
                  auto sl = slice_cols(t, cat, 2, 3);
                  return sum_all(t, square(t, sl));
              },
              {a, c}) < 1e-7);
    CHECK(max_grad_rel_err(
              [&](Tape& t) {
                  return sum_all(t, square(t, transpose(t, reshape(t, a, 4, 3))));
              },
              {a}) < 1e-7);
}

TEST_CASE("gather_rows gradient accumulates over repeated ids") {
    Rng rng(48);
    auto table = randn(5, 3, rng);
    std::vector<int> ids = {0, 2, 2, 4};
    CHECK(max_grad_rel_err(
              [&](Tape& t) { return sum_all(t, square(t, gather_rows(t, table, ids))); },
              {table}) < 1e-7);
}

TEST_CASE("multihead attention matches single-head composition and differentiates") {
    Rng rng(49);
    auto q = randn(5, 8, rng);
    auto k = randn(7, 8, rng);
    auto v = randn(7, 8, rng);
    auto bias = randn(5, 7, rng);
    bias->rg = false;

    CHECK(max_grad_rel_err(
              [&](Tape& t) {
                  return sum_all(t, square(t, multihead_attention(t, q, k, v, 2, bias)));
              },
              {q, k, v}, 1e-5) < 1e-5);

    // heads=2 equals manual per-head computation
    Tape t;
    t.enabled = false;
    auto full = multihead_attention(t, q, k, v, 2, bias);
    auto h0 = multihead_attention(t, slice_cols(t, q, 0, 4), slice_cols(t, k, 0, 4),
                                  slice_cols(t, v, 0, 4), 1, bias);
    auto h1 = multihead_attention(t, slice_cols(t, q, 4, 4), slice_cols(t, k, 4, 4),
                                  slice_cols(t, v, 4, 4), 1, bias);
    auto manual = concat_cols(t, {h0, h1});
    for (size_t i = 0; i < full->size(); i++) {
        CHECK(full->v[i] == doctest::Approx(manual->v[i]).epsilon(1e-12));
    }
}

TEST_CASE("conv3x3 and upsample2x gradients") {
    Rng rng(50);
    ParamRegistry reg;
    auto x = randn(4 * 4, 3, rng);
    auto filt = Linear::create(reg, "conv", ParamGroup::denoiser, 9 * 3, 5, rng);
    int oh = 0, ow = 0;
    CHECK(max_grad_rel_err(
              [&](Tape& t) {
                  return sum_all(t, square(t, conv3x3(t, x, 4, 4, filt, 1, oh, ow)));
              },
              {x, filt.w, filt.b}, 1e-5) < 1e-5);
    CHECK(oh == 4);
    CHECK(ow == 4);

    CHECK(max_grad_rel_err(
              [&](Tape& t) {
                  return sum_all(t, square(t, conv3x3(t, x, 4, 4, filt, 2, oh, ow)));
              },
              {x, filt.w}, 1e-5) < 1e-5);
    CHECK(oh == 2);
    CHECK(ow == 2);

    CHECK(max_grad_rel_err(
              [&](Tape& t) { return sum_all(t, square(t, upsample2x(t, x, 4, 4))); },
              {x}, 1e-5) < 1e-5);
}

TEST_CASE("grad accumulation across tapes on shared parameters") {
    Rng rng(51);
    auto w = randn(2, 2, rng);
    w->rg = true;
    w->ensure_grad();
    w->zero_grad();

    Tape t1;
    t1.backward(sum_all(t1, square(t1, w)));
    std::vector<double> g_once = w->g;
    Tape t2;
    t2.backward(sum_all(t2, square(t2, w)));
    for (size_t i = 0; i < w->size(); i++) {
        CHECK(w->g[i] == doctest::Approx(2 * g_once[i]).epsilon(1e-12));
    }
}

TEST_CASE("disabled tape records nothing and propagates no rg") {
    Rng rng(52);
    auto w = randn(2, 2, rng);
    w->rg = true;
    Tape t;
    t.enabled = false;
    auto y = square(t, w);
    CHECK_FALSE(y->rg);
    CHECK(t.size() == 0);
}

TEST_CASE("detach stops gradients") {
    Rng rng(53);
    auto w = randn(2, 2, rng);
    w->rg = true;
    w->ensure_grad();
    w->zero_grad();
    Tape t;
    auto loss = sum_all(t, mul(t, w, detach(square(t, w))));
    t.backward(loss);
    // d/dw of w * const(w^2) = w^2 (not 3w^2)
    for (size_t i = 0; i < w->size(); i++) {
        CHECK(w->g[i] == doctest::Approx(w->v[i] * w->v[i]).epsilon(1e-12));
    }
}

TEST_CASE("sinusoidal features and resample_nearest basics") {
    auto f = sinusoidal_features(0.0, 8);
    for (int i = 0; i < 4; i++) CHECK(f->v[i] == doctest::Approx(1.0));
    for (int i = 4; i < 8; i++) CHECK(f->v[i] == doctest::Approx(0.0));

    std::vector<double> src = {1, 2, 3, 4};  // 2x2
    auto up = resample_nearest(src, 2, 2, 4, 4);
    CHECK(up[0] == 1.0);
    CHECK(up[3] == 2.0);
    CHECK(up[15] == 4.0);
    auto down = resample_nearest(up, 4, 4, 2, 2);
    CHECK(down == src);
}
