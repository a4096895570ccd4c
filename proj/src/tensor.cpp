// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#include "glyphroute/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>

#include "glyphroute/errors.hpp"
#include "glyphroute/kernels.hpp"

// Activation buffers are recycled through a per-thread pool keyed by
// power-of-two capacity; a training step then allocates almost nothing.
// Gradient buffers are created lazily the first time a downstream op
// deposits gradient, so subgraphs that never feed the loss cost nothing in
// backward.

namespace {

thread_local std::map<size_t, std::vector<std::vector<double>>> t_pool;
constexpr size_t kMaxPerBucket = 128;
constexpr size_t kMinBucket = 64;

size_t bucket_ceil(size_t n) {
    size_t b = kMinBucket;
    while (b < n) b <<= 1;
    return b;
}

std::vector<double> pool_get(size_t n, bool zeroed) {
    size_t b = bucket_ceil(n);
    auto it = t_pool.find(b);
    if (it != t_pool.end() && !it->second.empty()) {
        std::vector<double> v = std::move(it->second.back());
        it->second.pop_back();
        v.resize(n);  // shrinking resize: stale contents, no fill
        if (zeroed) std::fill(v.begin(), v.end(), 0.0);
        return v;
    }
    std::vector<double> v;
    v.reserve(b);
    v.assign(n, 0.0);
    return v;
}

void pool_put(std::vector<double>&& v) {
    size_t cap = v.capacity();
    if (cap < kMinBucket) return;
    size_t b = kMinBucket;
    while ((b << 1) <= cap) b <<= 1;
    auto& stack = t_pool[b];
    if (stack.size() >= kMaxPerBucket) return;
    v.resize(b);
    stack.push_back(std::move(v));
}

Tensor alloc_tensor(int rows, int cols, bool zeroed) {
    auto t = std::make_shared<TensorImpl>();
    t->rows = rows;
    t->cols = cols;
    t->v = pool_get(static_cast<size_t>(rows) * cols, zeroed);
    return t;
}

// Output buffer for ops that overwrite every element.
Tensor raw_like(int rows, int cols) { return alloc_tensor(rows, cols, false); }

}  // namespace

TensorImpl::~TensorImpl() {
    pool_put(std::move(v));
    pool_put(std::move(g));
}

void TensorImpl::ensure_grad() {
    if (g.size() != size()) g = pool_get(size(), true);
}

void TensorImpl::zero_grad() {
    std::fill(g.begin(), g.end(), 0.0);
}

Tensor make_tensor(int rows, int cols, bool rg) {
    auto t = alloc_tensor(rows, cols, true);
    t->rg = rg;
    return t;
}

Tensor full_tensor(int rows, int cols, double value) {
    auto t = raw_like(rows, cols);
    std::fill(t->v.begin(), t->v.end(), value);
    return t;
}

Tensor tensor_from(int rows, int cols, std::initializer_list<double> values) {
    return tensor_from(rows, cols, std::vector<double>(values));
}

Tensor tensor_from(int rows, int cols, const std::vector<double>& values) {
    GR_CHECK(values.size() == static_cast<size_t>(rows) * cols, ShapeError,
             "tensor_from: value count does not match shape");
    auto t = raw_like(rows, cols);
    std::copy(values.begin(), values.end(), t->v.begin());
    return t;
}

Tensor randn_tensor(int rows, int cols, Rng& rng, double stddev) {
    auto t = raw_like(rows, cols);
    for (auto& x : t->v) x = rng.gaussian() * stddev;
    return t;
}

Tensor clone_tensor(const Tensor& x) {
    auto t = raw_like(x->rows, x->cols);
    std::copy(x->v.begin(), x->v.end(), t->v.begin());
    return t;
}

void Tape::backward(const Tensor& loss) {
    GR_CHECK(loss->rows == 1 && loss->cols == 1, ShapeError, "backward: loss must be 1x1");
    loss->ensure_grad();
    loss->g[0] += 1.0;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

bool grad_enabled(const Tape& tape, std::initializer_list<Tensor> inputs) {
    if (!tape.enabled) return false;
    for (const auto& in : inputs) {
        if (in && in->rg) return true;
    }
    return false;
}

static void same_shape(const Tensor& a, const Tensor& b, const char* op) {
    GR_CHECK(a->rows == b->rows && a->cols == b->cols, ShapeError,
             std::string(op) + ": shape mismatch");
}

Tensor add(Tape& t, const Tensor& a, const Tensor& b) {
    same_shape(a, b, "add");
    auto out = raw_like(a->rows, a->cols);
    kernels().add(out->size(), a->v.data(), b->v.data(), out->v.data());
    if (grad_enabled(t, {a, b})) {
        out->rg = true;
        t.push([a, b, out] {
            if (!out->has_grad()) return;
            if (a->rg) {
                a->ensure_grad();
                kernels().axpy(out->size(), 1.0, out->g.data(), a->g.data());
            }
            if (b->rg) {
                b->ensure_grad();
                kernels().axpy(out->size(), 1.0, out->g.data(), b->g.data());
            }
        });
    }
    return out;
}

Tensor sub(Tape& t, const Tensor& a, const Tensor& b) {
    same_shape(a, b, "sub");
    auto out = raw_like(a->rows, a->cols);
    kernels().sub(out->size(), a->v.data(), b->v.data(), out->v.data());
    if (grad_enabled(t, {a, b})) {
        out->rg = true;
        t.push([a, b, out] {
            if (!out->has_grad()) return;
            if (a->rg) {
                a->ensure_grad();
                kernels().axpy(out->size(), 1.0, out->g.data(), a->g.data());
            }
            if (b->rg) {
                b->ensure_grad();
                kernels().axpy(out->size(), -1.0, out->g.data(), b->g.data());
            }
        });
    }
    return out;
}

Tensor mul(Tape& t, const Tensor& a, const Tensor& b) {
    same_shape(a, b, "mul");
    auto out = raw_like(a->rows, a->cols);
    kernels().mul(out->size(), a->v.data(), b->v.data(), out->v.data());
    if (grad_enabled(t, {a, b})) {
        out->rg = true;
        t.push([a, b, out] {
            if (!out->has_grad()) return;
            size_t n = out->size();
            if (a->rg) {
                a->ensure_grad();
                for (size_t i = 0; i < n; i++) a->g[i] += out->g[i] * b->v[i];
            }
            if (b->rg) {
                b->ensure_grad();
                for (size_t i = 0; i < n; i++) b->g[i] += out->g[i] * a->v[i];
            }
        });
    }
    return out;
}

Tensor square(Tape& t, const Tensor& a) {
    auto out = raw_like(a->rows, a->cols);
    kernels().mul(out->size(), a->v.data(), a->v.data(), out->v.data());
    if (grad_enabled(t, {a})) {
        out->rg = true;
        t.push([a, out] {
            if (!out->has_grad()) return;
            a->ensure_grad();
            size_t n = out->size();
            for (size_t i = 0; i < n; i++) a->g[i] += 2.0 * a->v[i] * out->g[i];
        });
    }
    return out;
}

Tensor scale(Tape& t, const Tensor& a, double s) {
    auto out = raw_like(a->rows, a->cols);
    kernels().scale(out->size(), s, a->v.data(), out->v.data());
    if (grad_enabled(t, {a})) {
        out->rg = true;
        t.push([a, out, s] {
            if (!out->has_grad()) return;
            a->ensure_grad();
            kernels().axpy(out->size(), s, out->g.data(), a->g.data());
        });
    }
    return out;
}

Tensor add_scaled(Tape& t, const Tensor& a, const Tensor& b, double s) {
    same_shape(a, b, "add_scaled");
    auto out = raw_like(a->rows, a->cols);
    std::copy(a->v.begin(), a->v.end(), out->v.begin());
    kernels().axpy(out->size(), s, b->v.data(), out->v.data());
    if (grad_enabled(t, {a, b})) {
        out->rg = true;
        t.push([a, b, out, s] {
            if (!out->has_grad()) return;
            if (a->rg) {
                a->ensure_grad();
                kernels().axpy(out->size(), 1.0, out->g.data(), a->g.data());
            }
            if (b->rg) {
                b->ensure_grad();
                kernels().axpy(out->size(), s, out->g.data(), b->g.data());
            }
        });
    }
    return out;
}

Tensor silu(Tape& t, const Tensor& a) {
    auto out = raw_like(a->rows, a->cols);
    size_t n = out->size();
    for (size_t i = 0; i < n; i++) {
        double x = a->v[i];
        out->v[i] = x / (1.0 + std::exp(-x));
    }
    if (grad_enabled(t, {a})) {
        out->rg = true;
        t.push([a, out] {
            if (!out->has_grad()) return;
            a->ensure_grad();
            size_t n = out->size();
            for (size_t i = 0; i < n; i++) {
                double x = a->v[i];
                double sig = 1.0 / (1.0 + std::exp(-x));
                a->g[i] += out->g[i] * sig * (1.0 + x * (1.0 - sig));
            }
        });
    }
    return out;
}

Tensor log_eps(Tape& t, const Tensor& a, double eps) {
    auto out = raw_like(a->rows, a->cols);
    size_t n = out->size();
    for (size_t i = 0; i < n; i++) out->v[i] = std::log(a->v[i] + eps);
    if (grad_enabled(t, {a})) {
        out->rg = true;
        t.push([a, out, eps] {
            if (!out->has_grad()) return;
            a->ensure_grad();
            size_t n = out->size();
            for (size_t i = 0; i < n; i++) a->g[i] += out->g[i] / (a->v[i] + eps);
        });
    }
    return out;
}

Tensor add_rowvec(Tape& t, const Tensor& x, const Tensor& b) {
    GR_CHECK(b->rows == 1 && b->cols == x->cols, ShapeError, "add_rowvec: bias shape");
    auto out = raw_like(x->rows, x->cols);
    for (int i = 0; i < x->rows; i++) {
        kernels().add(x->cols, x->row(i), b->v.data(), out->row(i));
    }
    if (grad_enabled(t, {x, b})) {
        out->rg = true;
        t.push([x, b, out] {
            if (!out->has_grad()) return;
            if (x->rg) {
                x->ensure_grad();
                kernels().axpy(out->size(), 1.0, out->g.data(), x->g.data());
            }
            if (b->rg) {
                b->ensure_grad();
                for (int i = 0; i < out->rows; i++) {
                    kernels().axpy(out->cols, 1.0, out->grad_row(i), b->g.data());
                }
            }
        });
    }
    return out;
}

Tensor mul_colvec(Tape& t, const Tensor& x, const Tensor& m) {
    GR_CHECK(m->cols == 1 && m->rows == x->rows, ShapeError, "mul_colvec: scale shape");
    auto out = raw_like(x->rows, x->cols);
    for (int i = 0; i < x->rows; i++) {
        kernels().scale(x->cols, m->v[i], x->row(i), out->row(i));
    }
    if (grad_enabled(t, {x, m})) {
        out->rg = true;
        t.push([x, m, out] {
            if (!out->has_grad()) return;
            if (x->rg) {
                x->ensure_grad();
                for (int i = 0; i < out->rows; i++) {
                    kernels().axpy(out->cols, m->v[i], out->grad_row(i), x->grad_row(i));
                }
            }
            if (m->rg) {
                m->ensure_grad();
                for (int i = 0; i < out->rows; i++) {
                    m->g[i] += kernels().dot(out->cols, out->grad_row(i), x->row(i));
                }
            }
        });
    }
    return out;
}

Tensor matmul(Tape& t, const Tensor& a, const Tensor& b, bool ta, bool tb) {
    int m = ta ? a->cols : a->rows;
    int k = ta ? a->rows : a->cols;
    int kb = tb ? b->cols : b->rows;
    int n = tb ? b->rows : b->cols;
    GR_CHECK(k == kb, ShapeError, "matmul: inner dimension mismatch");
    GR_CHECK(!(ta && tb), ShapeError, "matmul: both-transposed form not supported");

    auto out = make_tensor(m, n);
    const auto& K = kernels();
    if (!ta && !tb) {
        K.matmul_nn(m, k, n, a->v.data(), a->cols, b->v.data(), b->cols, out->v.data(), n);
    } else if (!ta && tb) {
        K.matmul_nt(m, k, n, a->v.data(), a->cols, b->v.data(), b->cols, out->v.data(), n);
    } else {
        K.matmul_tn(a->rows, m, n, a->v.data(), a->cols, b->v.data(), b->cols, out->v.data(), n);
    }

    if (grad_enabled(t, {a, b})) {
        out->rg = true;
        t.push([a, b, out, ta, tb, m, k, n] {
            if (!out->has_grad()) return;
            const auto& K = kernels();
            const double* dc = out->g.data();
            if (a->rg) {
                a->ensure_grad();
                if (!ta && !tb) {
                    K.matmul_nt(m, n, k, dc, n, b->v.data(), b->cols, a->g.data(), a->cols);
                } else if (!ta && tb) {
                    K.matmul_nn(m, n, k, dc, n, b->v.data(), b->cols, a->g.data(), a->cols);
                } else {
                    K.matmul_nt(k, n, m, b->v.data(), b->cols, dc, n, a->g.data(), a->cols);
                }
            }
            if (b->rg) {
                b->ensure_grad();
                if (!ta && !tb) {
                    K.matmul_tn(m, k, n, a->v.data(), a->cols, dc, n, b->g.data(), b->cols);
                } else if (!ta && tb) {
                    K.matmul_tn(m, n, k, dc, n, a->v.data(), a->cols, b->g.data(), b->cols);
                } else {
                    K.matmul_nn(k, m, n, a->v.data(), a->cols, dc, n, b->g.data(), b->cols);
                }
            }
        });
    }
    return out;
}

Tensor softmax_rows(Tape& t, const Tensor& x) {
    auto out = raw_like(x->rows, x->cols);
    for (int i = 0; i < x->rows; i++) {
        const double* xi = x->row(i);
        double* yi = out->row(i);
        double mx = xi[0];
        for (int j = 1; j < x->cols; j++) mx = std::max(mx, xi[j]);
        double denom = 0.0;
        for (int j = 0; j < x->cols; j++) {
            yi[j] = std::exp(xi[j] - mx);
            denom += yi[j];
        }
        double inv = 1.0 / denom;
        for (int j = 0; j < x->cols; j++) yi[j] *= inv;
    }
    if (grad_enabled(t, {x})) {
        out->rg = true;
        t.push([x, out] {
            if (!out->has_grad()) return;
            x->ensure_grad();
            for (int i = 0; i < out->rows; i++) {
                const double* yi = out->row(i);
                const double* dyi = out->grad_row(i);
                double* dxi = x->grad_row(i);
                double inner = kernels().dot(out->cols, dyi, yi);
                for (int j = 0; j < out->cols; j++) dxi[j] += yi[j] * (dyi[j] - inner);
            }
        });
    }
    return out;
}

Tensor softmax_cols_perm_invariant(Tape& t, const Tensor& x) {
    auto out = raw_like(x->rows, x->cols);
    int r = x->rows, c = x->cols;
    std::vector<double> expcol(static_cast<size_t>(r));
    std::vector<double> sorted(static_cast<size_t>(r));
    for (int j = 0; j < c; j++) {
        double mx = x->at(0, j);
        for (int i = 1; i < r; i++) mx = std::max(mx, x->at(i, j));
        for (int i = 0; i < r; i++) expcol[static_cast<size_t>(i)] = std::exp(x->at(i, j) - mx);
        // Sorted accumulation: the denominator depends only on the multiset
        // of logits, so permuting rows permutes the output bitwise.
        sorted = expcol;
        std::sort(sorted.begin(), sorted.end());
        double denom = 0.0;
        for (double e : sorted) denom += e;
        double inv = 1.0 / denom;
        for (int i = 0; i < r; i++) out->at(i, j) = expcol[static_cast<size_t>(i)] * inv;
    }
    if (grad_enabled(t, {x})) {
        out->rg = true;
        t.push([x, out] {
            if (!out->has_grad()) return;
            x->ensure_grad();
            int r = out->rows, c = out->cols;
            for (int j = 0; j < c; j++) {
                double inner = 0.0;
                for (int i = 0; i < r; i++) {
                    inner += out->g[static_cast<size_t>(i) * c + j] * out->at(i, j);
                }
                for (int i = 0; i < r; i++) {
                    x->g[static_cast<size_t>(i) * c + j] +=
                        out->at(i, j) * (out->g[static_cast<size_t>(i) * c + j] - inner);
                }
            }
        });
    }
    return out;
}

Tensor layernorm_rows(Tape& t, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                      double eps) {
    GR_CHECK(gamma->rows == 1 && gamma->cols == x->cols, ShapeError, "layernorm: gamma shape");
    GR_CHECK(beta->rows == 1 && beta->cols == x->cols, ShapeError, "layernorm: beta shape");
    auto out = raw_like(x->rows, x->cols);
    int c = x->cols;
    auto xhat = std::make_shared<std::vector<double>>(pool_get(x->size(), false));
    auto invstd = std::make_shared<std::vector<double>>(static_cast<size_t>(x->rows));
    for (int i = 0; i < x->rows; i++) {
        const double* xi = x->row(i);
        double mean = kernels().sum(c, xi) / c;
        double var = 0.0;
        for (int j = 0; j < c; j++) {
            double d = xi[j] - mean;
            var += d * d;
        }
        var /= c;
        double is = 1.0 / std::sqrt(var + eps);
        (*invstd)[static_cast<size_t>(i)] = is;
        double* yi = out->row(i);
        double* xh = xhat->data() + static_cast<size_t>(i) * c;
        for (int j = 0; j < c; j++) {
            xh[j] = (xi[j] - mean) * is;
            yi[j] = xh[j] * gamma->v[j] + beta->v[j];
        }
    }
    if (grad_enabled(t, {x, gamma, beta})) {
        out->rg = true;
        t.push([x, gamma, beta, out, xhat, invstd] {
            if (!out->has_grad()) return;
            int c = out->cols;
            std::vector<double> gdy(static_cast<size_t>(c));
            for (int i = 0; i < out->rows; i++) {
                const double* dyi = out->grad_row(i);
                const double* xh = xhat->data() + static_cast<size_t>(i) * c;
                if (gamma->rg) {
                    gamma->ensure_grad();
                    for (int j = 0; j < c; j++) gamma->g[j] += dyi[j] * xh[j];
                }
                if (beta->rg) {
                    beta->ensure_grad();
                    for (int j = 0; j < c; j++) beta->g[j] += dyi[j];
                }
                if (x->rg) {
                    x->ensure_grad();
                    double* dxi = x->grad_row(i);
                    double mean_g = 0.0, mean_gx = 0.0;
                    for (int j = 0; j < c; j++) {
                        gdy[static_cast<size_t>(j)] = dyi[j] * gamma->v[j];
                        mean_g += gdy[static_cast<size_t>(j)];
                        mean_gx += gdy[static_cast<size_t>(j)] * xh[j];
                    }
                    mean_g /= c;
                    mean_gx /= c;
                    double is = (*invstd)[static_cast<size_t>(i)];
                    for (int j = 0; j < c; j++) {
                        dxi[j] += is * (gdy[static_cast<size_t>(j)] - mean_g - xh[j] * mean_gx);
                    }
                }
            }
        });
    }
    return out;
}

Tensor reshape(Tape& t, const Tensor& x, int rows, int cols) {
    GR_CHECK(static_cast<size_t>(rows) * cols == x->size(), ShapeError, "reshape: size mismatch");
    auto out = raw_like(rows, cols);
    std::copy(x->v.begin(), x->v.end(), out->v.begin());
    if (grad_enabled(t, {x})) {
        out->rg = true;
        t.push([x, out] {
            if (!out->has_grad()) return;
            x->ensure_grad();
            kernels().axpy(out->size(), 1.0, out->g.data(), x->g.data());
        });
    }
    return out;
}

Tensor transpose(Tape& t, const Tensor& x) {
    auto out = raw_like(x->cols, x->rows);
    for (int i = 0; i < x->rows; i++) {
        for (int j = 0; j < x->cols; j++) out->at(j, i) = x->at(i, j);
    }
    if (grad_enabled(t, {x})) {
        out->rg = true;
        t.push([x, out] {
            if (!out->has_grad()) return;
            x->ensure_grad();
            for (int i = 0; i < x->rows; i++) {
                for (int j = 0; j < x->cols; j++) {
                    x->g[static_cast<size_t>(i) * x->cols + j] +=
                        out->g[static_cast<size_t>(j) * out->cols + i];
                }
            }
        });
    }
    return out;
}

Tensor concat_rows(Tape& t, const std::vector<Tensor>& xs) {
    GR_CHECK(!xs.empty(), ShapeError, "concat_rows: empty list");
    int cols = xs[0]->cols;
    int rows = 0;
    for (const auto& x : xs) {
        GR_CHECK(x->cols == cols, ShapeError, "concat_rows: column mismatch");
        rows += x->rows;
    }
    auto out = raw_like(rows, cols);
    int r = 0;
    for (const auto& x : xs) {
        std::memcpy(out->row(r), x->v.data(), x->size() * sizeof(double));
        r += x->rows;
    }
    bool any = false;
    for (const auto& x : xs) any = any || x->rg;
    if (t.enabled && any) {
        out->rg = true;
        t.push([xs, out] {
            if (!out->has_grad()) return;
            int r = 0;
            for (const auto& x : xs) {
                if (x->rg) {
                    x->ensure_grad();
                    kernels().axpy(x->size(), 1.0, out->grad_row(r), x->g.data());
                }
                r += x->rows;
            }
        });
    }
    return out;
}

Tensor concat_cols(Tape& t, const std::vector<Tensor>& xs) {
    GR_CHECK(!xs.empty(), ShapeError, "concat_cols: empty list");
    int rows = xs[0]->rows;
    int cols = 0;
    for (const auto& x : xs) {
        GR_CHECK(x->rows == rows, ShapeError, "concat_cols: row mismatch");
        cols += x->cols;
    }
    auto out = raw_like(rows, cols);
    int c = 0;
    for (const auto& x : xs) {
        for (int i = 0; i < rows; i++) {
            std::memcpy(out->row(i) + c, x->row(i), x->cols * sizeof(double));
        }
        c += x->cols;
    }
    bool any = false;
    for (const auto& x : xs) any = any || x->rg;
    if (t.enabled && any) {
        out->rg = true;
        t.push([xs, out] {
            if (!out->has_grad()) return;
            int c = 0;
            for (const auto& x : xs) {
                if (x->rg) {
                    x->ensure_grad();
                    for (int i = 0; i < out->rows; i++) {
                        kernels().axpy(x->cols, 1.0, out->grad_row(i) + c, x->grad_row(i));
                    }
                }
                c += x->cols;
            }
        });
    }
    return out;
}

Tensor slice_rows(Tape& t, const Tensor& x, int r0, int nrows) {
    GR_CHECK(r0 >= 0 && r0 + nrows <= x->rows, ShapeError, "slice_rows: out of range");
    auto out = raw_like(nrows, x->cols);
    std::memcpy(out->v.data(), x->row(r0), out->size() * sizeof(double));
    if (grad_enabled(t, {x})) {
        out->rg = true;
        t.push([x, out, r0] {
            if (!out->has_grad()) return;
            x->ensure_grad();
            kernels().axpy(out->size(), 1.0, out->g.data(), x->grad_row(r0));
        });
    }
    return out;
}

Tensor slice_cols(Tape& t, const Tensor& x, int c0, int ncols) {
    GR_CHECK(c0 >= 0 && c0 + ncols <= x->cols, ShapeError, "slice_cols: out of range");
    auto out = raw_like(x->rows, ncols);
    for (int i = 0; i < x->rows; i++) {
        std::memcpy(out->row(i), x->row(i) + c0, ncols * sizeof(double));
    }
    if (grad_enabled(t, {x})) {
        out->rg = true;
        t.push([x, out, c0] {
            if (!out->has_grad()) return;
            x->ensure_grad();
            for (int i = 0; i < out->rows; i++) {
                kernels().axpy(out->cols, 1.0, out->grad_row(i), x->grad_row(i) + c0);
            }
        });
    }
    return out;
}

Tensor gather_rows(Tape& t, const Tensor& table, const std::vector<int>& ids) {
    auto out = raw_like(static_cast<int>(ids.size()), table->cols);
    for (size_t i = 0; i < ids.size(); i++) {
        GR_CHECK(ids[i] >= 0 && ids[i] < table->rows, ShapeError, "gather_rows: id out of range");
        std::memcpy(out->row(static_cast<int>(i)), table->row(ids[i]),
                    table->cols * sizeof(double));
    }
    if (grad_enabled(t, {table})) {
        out->rg = true;
        t.push([table, out, ids] {
            if (!out->has_grad()) return;
            table->ensure_grad();
            for (size_t i = 0; i < ids.size(); i++) {
                kernels().axpy(table->cols, 1.0, out->grad_row(static_cast<int>(i)),
                               table->grad_row(ids[i]));
            }
        });
    }
    return out;
}

Tensor sum_all(Tape& t, const Tensor& x) {
    auto out = raw_like(1, 1);
    out->v[0] = kernels().sum(x->size(), x->v.data());
    if (grad_enabled(t, {x})) {
        out->rg = true;
        t.push([x, out] {
            if (!out->has_grad()) return;
            x->ensure_grad();
            double dy = out->g[0];
            for (auto& gi : x->g) gi += dy;
        });
    }
    return out;
}

Tensor mean_all(Tape& t, const Tensor& x) {
    auto s = sum_all(t, x);
    return scale(t, s, 1.0 / static_cast<double>(x->size()));
}

Tensor mse(Tape& t, const Tensor& a, const Tensor& b) {
    return mean_all(t, square(t, sub(t, a, b)));
}

Tensor detach(const Tensor& x) {
    auto out = raw_like(x->rows, x->cols);
    std::copy(x->v.begin(), x->v.end(), out->v.begin());
    out->rg = false;
    return out;
}

void check_finite(const Tensor& x, const char* where) {
    for (double v : x->v) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string("non-finite value in ") + where);
        }
    }
}

uint64_t tensor_value_hash(const Tensor& x) {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const void* data, size_t bytes) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < bytes; i++) {
            h ^= p[i];
            h *= 0x100000001b3ULL;
        }
    };
    mix(&x->rows, sizeof(x->rows));
    mix(&x->cols, sizeof(x->cols));
    mix(x->v.data(), x->v.size() * sizeof(double));
    return h;
}
