// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "glyphroute/rng.hpp"

// Minimal reverse-mode autodiff over row-major 2D double tensors.
//
// Everything in the model is expressed as rows x cols matrices (latents are
// (h*w) x channels, token sets are tokens x dim, routing maps are
// (N+1) x (h*w)). There is no batch axis; training batches are gradient
// accumulation loops over samples, which keeps peak memory at one sample's
// tape and makes every reduction order deterministic.
//
// A Tape records backward closures for one forward pass. Parameters keep
// their .g buffers across tapes so gradients accumulate across samples;
// the optimizer zeroes them.

struct TensorImpl {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;
    std::vector<double> g;
    bool rg = false;  // tracked by autograd

    ~TensorImpl();

    size_t size() const { return static_cast<size_t>(rows) * cols; }
    double& at(int i, int j) { return v[static_cast<size_t>(i) * cols + j]; }
    double at(int i, int j) const { return v[static_cast<size_t>(i) * cols + j]; }
    double* row(int i) { return v.data() + static_cast<size_t>(i) * cols; }
    const double* row(int i) const { return v.data() + static_cast<size_t>(i) * cols; }
    double* grad_row(int i) { return g.data() + static_cast<size_t>(i) * cols; }
    // True once a downstream op has deposited gradient.
    bool has_grad() const { return !g.empty(); }
    void ensure_grad();
    void zero_grad();
};

using Tensor = std::shared_ptr<TensorImpl>;

Tensor make_tensor(int rows, int cols, bool rg = false);
Tensor full_tensor(int rows, int cols, double value);
Tensor tensor_from(int rows, int cols, std::initializer_list<double> values);
Tensor tensor_from(int rows, int cols, const std::vector<double>& values);
Tensor randn_tensor(int rows, int cols, Rng& rng, double stddev);
Tensor clone_tensor(const Tensor& x);

struct Tape {
    bool enabled = true;

    void push(std::function<void()> bwd) { ops_.push_back(std::move(bwd)); }
    // Seeds d(loss)/d(loss) = 1 and runs recorded closures in reverse.
    void backward(const Tensor& loss);
    void clear() { ops_.clear(); }
    size_t size() const { return ops_.size(); }

private:
    std::vector<std::function<void()>> ops_;
};

bool grad_enabled(const Tape& tape, std::initializer_list<Tensor> inputs);

// ---- elementwise ----
Tensor add(Tape& t, const Tensor& a, const Tensor& b);
Tensor sub(Tape& t, const Tensor& a, const Tensor& b);
Tensor mul(Tape& t, const Tensor& a, const Tensor& b);
Tensor square(Tape& t, const Tensor& a);
Tensor scale(Tape& t, const Tensor& a, double s);
Tensor add_scaled(Tape& t, const Tensor& a, const Tensor& b, double s);  // a + s*b
Tensor silu(Tape& t, const Tensor& a);
Tensor log_eps(Tape& t, const Tensor& a, double eps = 1e-30);  // log(a + eps)

// ---- broadcasts ----
Tensor add_rowvec(Tape& t, const Tensor& x, const Tensor& b);   // x[n,c] + b[1,c]
Tensor mul_colvec(Tape& t, const Tensor& x, const Tensor& m);   // x[n,c] * m[n,1]

// ---- linear algebra ----
Tensor matmul(Tape& t, const Tensor& a, const Tensor& b, bool ta = false, bool tb = false);

// ---- normalization / softmax ----
Tensor softmax_rows(Tape& t, const Tensor& x);
// Softmax over the row axis (per column), with a sorted-addend denominator so
// the result is bitwise invariant under row permutation. Used for routing
// maps, where reference-permutation equivariance is asserted bitwise.
Tensor softmax_cols_perm_invariant(Tape& t, const Tensor& x);
Tensor layernorm_rows(Tape& t, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                      double eps = 1e-6);

// ---- shape ----
Tensor reshape(Tape& t, const Tensor& x, int rows, int cols);
Tensor transpose(Tape& t, const Tensor& x);
Tensor concat_rows(Tape& t, const std::vector<Tensor>& xs);
Tensor concat_cols(Tape& t, const std::vector<Tensor>& xs);
Tensor slice_rows(Tape& t, const Tensor& x, int r0, int nrows);
Tensor slice_cols(Tape& t, const Tensor& x, int c0, int ncols);

// ---- lookup ----
Tensor gather_rows(Tape& t, const Tensor& table, const std::vector<int>& ids);

// ---- reductions ----
Tensor sum_all(Tape& t, const Tensor& x);
Tensor mean_all(Tape& t, const Tensor& x);
Tensor mse(Tape& t, const Tensor& a, const Tensor& b);

// ---- graph utilities ----
Tensor detach(const Tensor& x);
void check_finite(const Tensor& x, const char* where);

// Byte hash of the value buffer (shape-tagged FNV-1a); bitwise comparisons.
uint64_t tensor_value_hash(const Tensor& x);
