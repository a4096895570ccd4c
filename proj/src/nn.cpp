// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#include "glyphroute/nn.hpp"

#include <cmath>

#include "glyphroute/errors.hpp"
#include "glyphroute/kernels.hpp"

const char* param_group_name(ParamGroup g) {
    switch (g) {
        case ParamGroup::denoiser: return "denoiser";
        case ParamGroup::inject: return "inject";
        case ParamGroup::concept_enc: return "concept";
        case ParamGroup::detail: return "detail";
        case ParamGroup::router: return "router";
    }
    return "?";
}

Tensor ParamRegistry::add(const std::string& name, ParamGroup group, Tensor t) {
    GR_CHECK(find(name) == nullptr, ConfigError, "duplicate parameter name: " + name);
    t->rg = true;
    t->ensure_grad();
    entries_.push_back({name, group, t, nullptr, nullptr});
    return t;
}

const ParamRegistry::Entry* ParamRegistry::find(const std::string& name) const {
    for (const auto& e : entries_) {
        if (e.name == name) return &e;
    }
    return nullptr;
}

size_t ParamRegistry::scalar_count() const {
    size_t n = 0;
    for (const auto& e : entries_) n += e.t->size();
    return n;
}

size_t ParamRegistry::scalar_count(ParamGroup g) const {
    size_t n = 0;
    for (const auto& e : entries_) {
        if (e.group == g) n += e.t->size();
    }
    return n;
}

uint64_t ParamRegistry::group_hash(ParamGroup g) const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& e : entries_) {
        if (e.group != g) continue;
        uint64_t th = tensor_value_hash(e.t);
        h ^= th;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void ParamRegistry::zero_grads() {
    for (auto& e : entries_) e.t->zero_grad();
}

Linear Linear::create(ParamRegistry& reg, const std::string& name, ParamGroup group,
                      int in, int out, Rng& rng, bool zero_init, bool bias) {
    Linear l;
    if (zero_init) {
        l.w = make_tensor(in, out);
    } else {
        // LeCun-style fan-in init.
        l.w = randn_tensor(in, out, rng, 1.0 / std::sqrt(static_cast<double>(in)));
    }
    reg.add(name + ".w", group, l.w);
    if (bias) {
        l.b = make_tensor(1, out);
        reg.add(name + ".b", group, l.b);
    }
    return l;
}

Tensor Linear::forward(Tape& t, const Tensor& x) const {
    auto y = matmul(t, x, w);
    if (b) y = add_rowvec(t, y, b);
    return y;
}

LayerNorm LayerNorm::create(ParamRegistry& reg, const std::string& name, ParamGroup group,
                            int dim) {
    LayerNorm ln;
    ln.gamma = full_tensor(1, dim, 1.0);
    ln.beta = make_tensor(1, dim);
    reg.add(name + ".g", group, ln.gamma);
    reg.add(name + ".b", group, ln.beta);
    return ln;
}

Tensor LayerNorm::forward(Tape& t, const Tensor& x) const {
    return layernorm_rows(t, x, gamma, beta);
}

// Fused attention: one tape node, per-head views via kernel strides, softmax
// weights kept for the hand-written backward.
Tensor multihead_attention(Tape& t, const Tensor& q, const Tensor& k, const Tensor& v,
                           int heads, const Tensor& bias) {
    GR_CHECK(q->cols == k->cols && k->rows == v->rows, ShapeError, "attention: shape mismatch");
    GR_CHECK(q->cols % heads == 0 && v->cols % heads == 0, ShapeError,
             "attention: heads must divide dims");
    int nq = q->rows, nk = k->rows;
    int d = q->cols, dv = v->cols;
    int dh = d / heads, dvh = dv / heads;
    if (bias) {
        GR_CHECK(bias->rows == nq && bias->cols == nk, ShapeError, "attention: bias shape");
    }
    double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    const auto& K = kernels();

    // softmax weights for all heads, stacked row blocks [heads*nq x nk]
    auto w_all = make_tensor(heads * nq, nk);
    auto out = make_tensor(nq, dv);
    for (int h = 0; h < heads; h++) {
        double* wh = w_all->row(h * nq);
        K.matmul_nt(nq, dh, nk, q->v.data() + h * dh, d, k->v.data() + h * dh, d, wh, nk);
        for (int i = 0; i < nq; i++) {
            double* row = wh + static_cast<size_t>(i) * nk;
            const double* brow = bias ? bias->row(i) : nullptr;
            double mx = -1e300;
            for (int j = 0; j < nk; j++) {
                row[j] = row[j] * inv_sqrt + (brow ? brow[j] : 0.0);
                mx = std::max(mx, row[j]);
            }
            double denom = 0.0;
            for (int j = 0; j < nk; j++) {
                row[j] = std::exp(row[j] - mx);
                denom += row[j];
            }
            double inv = 1.0 / denom;
            for (int j = 0; j < nk; j++) row[j] *= inv;
        }
        K.matmul_nn(nq, nk, dvh, wh, nk, v->v.data() + h * dvh, dv,
                    out->v.data() + h * dvh, dv);
    }

    if (grad_enabled(t, {q, k, v, bias})) {
        out->rg = true;
        t.push([q, k, v, bias, w_all, out, heads, nq, nk, d, dv, dh, dvh, inv_sqrt] {
            if (!out->has_grad()) return;
            const auto& K = kernels();
            if (q->rg) q->ensure_grad();
            if (k->rg) k->ensure_grad();
            if (v->rg) v->ensure_grad();
            if (bias && bias->rg) bias->ensure_grad();
            std::vector<double> ds(static_cast<size_t>(nq) * nk);
            for (int h = 0; h < heads; h++) {
                const double* wh = w_all->row(h * nq);
                const double* dout_h = out->g.data() + h * dvh;
                if (v->rg) {
                    K.matmul_tn(nq, nk, dvh, wh, nk, dout_h, dv, v->g.data() + h * dvh, dv);
                }
                // dW = dOut_h * V_h^T, then softmax backward into ds
                std::fill(ds.begin(), ds.end(), 0.0);
                K.matmul_nt(nq, dvh, nk, dout_h, dv, v->v.data() + h * dvh, dv, ds.data(), nk);
                for (int i = 0; i < nq; i++) {
                    double* dsi = ds.data() + static_cast<size_t>(i) * nk;
                    const double* wi = wh + static_cast<size_t>(i) * nk;
                    double inner = K.dot(nk, dsi, wi);
                    for (int j = 0; j < nk; j++) dsi[j] = wi[j] * (dsi[j] - inner);
                }
                if (bias && bias->rg) {
                    K.axpy(static_cast<size_t>(nq) * nk, 1.0, ds.data(), bias->g.data());
                }
                // logits carried a 1/sqrt(dh) factor ahead of Q.K^T
                K.scale(ds.size(), inv_sqrt, ds.data(), ds.data());
                if (q->rg) {
                    K.matmul_nn(nq, nk, dh, ds.data(), nk, k->v.data() + h * dh, d,
                                q->g.data() + h * dh, d);
                }
                if (k->rg) {
                    K.matmul_tn(nq, nk, dh, ds.data(), nk, q->v.data() + h * dh, d,
                                k->g.data() + h * dh, d);
                }
            }
        });
    }
    return out;
}

Tensor im2col3x3(Tape& t, const Tensor& x, int h, int w, int stride, int& oh, int& ow) {
    GR_CHECK(x->rows == h * w, ShapeError, "im2col: spatial size mismatch");
    GR_CHECK(stride == 1 || stride == 2, ShapeError, "im2col: stride must be 1 or 2");
    int cin = x->cols;
    oh = (h + stride - 1) / stride;
    ow = (w + stride - 1) / stride;
    auto col = make_tensor(oh * ow, 9 * cin);
    for (int oy = 0; oy < oh; oy++) {
        for (int ox = 0; ox < ow; ox++) {
            double* dst = col->row(oy * ow + ox);
            int iy0 = oy * stride - 1;
            int ix0 = ox * stride - 1;
            for (int ky = 0; ky < 3; ky++) {
                for (int kx = 0; kx < 3; kx++) {
                    int iy = iy0 + ky;
                    int ix = ix0 + kx;
                    double* cell = dst + (ky * 3 + kx) * cin;
                    if (iy >= 0 && iy < h && ix >= 0 && ix < w) {
                        const double* src = x->row(iy * w + ix);
                        for (int c = 0; c < cin; c++) cell[c] = src[c];
                    }
                    // zeros already present for padding
                }
            }
        }
    }
    if (grad_enabled(t, {x})) {
        col->rg = true;
        int oh_c = oh, ow_c = ow;
        t.push([x, col, h, w, stride, oh_c, ow_c, cin] {
            if (!col->has_grad()) return;
            x->ensure_grad();
            for (int oy = 0; oy < oh_c; oy++) {
                for (int ox = 0; ox < ow_c; ox++) {
                    const double* dcol = col->grad_row(oy * ow_c + ox);
                    int iy0 = oy * stride - 1;
                    int ix0 = ox * stride - 1;
                    for (int ky = 0; ky < 3; ky++) {
                        for (int kx = 0; kx < 3; kx++) {
                            int iy = iy0 + ky;
                            int ix = ix0 + kx;
                            if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                            double* dx = x->grad_row(iy * w + ix);
                            const double* cell = dcol + (ky * 3 + kx) * cin;
                            for (int c = 0; c < cin; c++) dx[c] += cell[c];
                        }
                    }
                }
            }
        });
    }
    return col;
}

Tensor conv3x3(Tape& t, const Tensor& x, int h, int w, const Linear& filt, int stride,
               int& oh, int& ow) {
    auto col = im2col3x3(t, x, h, w, stride, oh, ow);
    return filt.forward(t, col);
}

Tensor upsample2x(Tape& t, const Tensor& x, int h, int w) {
    auto out = make_tensor(4 * h * w, x->cols);
    int W2 = 2 * w;
    for (int y = 0; y < 2 * h; y++) {
        for (int xx = 0; xx < W2; xx++) {
            const double* src = x->row((y / 2) * w + (xx / 2));
            double* dst = out->row(y * W2 + xx);
            for (int c = 0; c < x->cols; c++) dst[c] = src[c];
        }
    }
    if (grad_enabled(t, {x})) {
        out->rg = true;
        t.push([x, out, h, w, W2] {
            if (!out->has_grad()) return;
            x->ensure_grad();
            for (int y = 0; y < 2 * h; y++) {
                for (int xx = 0; xx < W2; xx++) {
                    double* dx = x->grad_row((y / 2) * w + (xx / 2));
                    const double* dy = out->grad_row(y * W2 + xx);
                    for (int c = 0; c < x->cols; c++) dx[c] += dy[c];
                }
            }
        });
    }
    return out;
}

std::vector<double> resample_nearest(const std::vector<double>& src, int h0, int w0,
                                     int h1, int w1) {
    std::vector<double> dst(static_cast<size_t>(h1) * w1);
    for (int y = 0; y < h1; y++) {
        int sy = std::min(h0 - 1, (2 * y + 1) * h0 / (2 * h1));  // center-aligned
        for (int x = 0; x < w1; x++) {
            int sx = std::min(w0 - 1, (2 * x + 1) * w0 / (2 * w1));
            dst[static_cast<size_t>(y) * w1 + x] = src[static_cast<size_t>(sy) * w0 + sx];
        }
    }
    return dst;
}

Tensor resample_rows_nearest(Tape& t, const Tensor& x, int h0, int w0, int h1, int w1) {
    GR_CHECK(x->cols == h0 * w0, ShapeError, "resample_rows_nearest: field size mismatch");
    // Column gather map shared by all rows.
    std::vector<int> src_col(static_cast<size_t>(h1) * w1);
    for (int y = 0; y < h1; y++) {
        int sy = std::min(h0 - 1, (2 * y + 1) * h0 / (2 * h1));  // center-aligned
        for (int xx = 0; xx < w1; xx++) {
            int sx = std::min(w0 - 1, (2 * xx + 1) * w0 / (2 * w1));
            src_col[static_cast<size_t>(y) * w1 + xx] = sy * w0 + sx;
        }
    }
    auto out = make_tensor(x->rows, h1 * w1);
    for (int i = 0; i < x->rows; i++) {
        const double* src = x->row(i);
        double* dst = out->row(i);
        for (size_t j = 0; j < src_col.size(); j++) dst[j] = src[src_col[j]];
    }
    if (grad_enabled(t, {x})) {
        out->rg = true;
        auto map = std::make_shared<std::vector<int>>(std::move(src_col));
        t.push([x, out, map] {
            if (!out->has_grad()) return;
            x->ensure_grad();
            for (int i = 0; i < out->rows; i++) {
                const double* dy = out->grad_row(i);
                double* dx = x->grad_row(i);
                for (size_t j = 0; j < map->size(); j++) dx[(*map)[j]] += dy[j];
            }
        });
    }
    return out;
}

Tensor sinusoidal_features(double x, int dim) {
    GR_CHECK(dim % 2 == 0, ShapeError, "sinusoidal_features: dim must be even");
    auto out = make_tensor(1, dim);
    int half = dim / 2;
    double log_base = std::log(10000.0) / static_cast<double>(half);
    for (int i = 0; i < half; i++) {
        double freq = std::exp(-static_cast<double>(i) * log_base);
        out->v[i] = std::cos(x * freq);
        out->v[i + half] = std::sin(x * freq);
    }
    return out;
}
