// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#include "glyphroute/kernels.hpp"

namespace {

void axpy_scalar(size_t n, double a, const double* x, double* y) {
    for (size_t i = 0; i < n; i++) y[i] += a * x[i];
}

void scale_scalar(size_t n, double a, const double* x, double* y) {
    for (size_t i = 0; i < n; i++) y[i] = a * x[i];
}

void add_scalar(size_t n, const double* x, const double* y, double* z) {
    for (size_t i = 0; i < n; i++) z[i] = x[i] + y[i];
}

void sub_scalar(size_t n, const double* x, const double* y, double* z) {
    for (size_t i = 0; i < n; i++) z[i] = x[i] - y[i];
}

void mul_scalar(size_t n, const double* x, const double* y, double* z) {
    for (size_t i = 0; i < n; i++) z[i] = x[i] * y[i];
}

double dot_scalar(size_t n, const double* x, const double* y) {
    double acc = 0.0;
    for (size_t i = 0; i < n; i++) acc += x[i] * y[i];
    return acc;
}

double sum_scalar(size_t n, const double* x) {
    double acc = 0.0;
    for (size_t i = 0; i < n; i++) acc += x[i];
    return acc;
}

double sumsq_scalar(size_t n, const double* x) {
    double acc = 0.0;
    for (size_t i = 0; i < n; i++) acc += x[i] * x[i];
    return acc;
}

void matmul_nn_scalar(int m, int k, int n,
                      const double* a, int lda,
                      const double* b, int ldb,
                      double* c, int ldc) {
    for (int i = 0; i < m; i++) {
        const double* ai = a + static_cast<size_t>(i) * lda;
        double* ci = c + static_cast<size_t>(i) * ldc;
        for (int p = 0; p < k; p++) {
            double aip = ai[p];
            const double* bp = b + static_cast<size_t>(p) * ldb;
            for (int j = 0; j < n; j++) ci[j] += aip * bp[j];
        }
    }
}

void matmul_nt_scalar(int m, int k, int n,
                      const double* a, int lda,
                      const double* b, int ldb,
                      double* c, int ldc) {
    for (int i = 0; i < m; i++) {
        const double* ai = a + static_cast<size_t>(i) * lda;
        double* ci = c + static_cast<size_t>(i) * ldc;
        for (int j = 0; j < n; j++) {
            const double* bj = b + static_cast<size_t>(j) * ldb;
            double acc = 0.0;
            for (int p = 0; p < k; p++) acc += ai[p] * bj[p];
            ci[j] += acc;
        }
    }
}

void matmul_tn_scalar(int m, int k, int n,
                      const double* a, int lda,
                      const double* b, int ldb,
                      double* c, int ldc) {
    for (int i = 0; i < m; i++) {
        const double* ai = a + static_cast<size_t>(i) * lda;
        const double* bi = b + static_cast<size_t>(i) * ldb;
        for (int p = 0; p < k; p++) {
            double aip = ai[p];
            double* cp = c + static_cast<size_t>(p) * ldc;
            for (int j = 0; j < n; j++) cp[j] += aip * bi[j];
        }
    }
}

}  // namespace

const KernelTable kernels_scalar = {
    "scalar",
    axpy_scalar,
    scale_scalar,
    add_scalar,
    sub_scalar,
    mul_scalar,
    dot_scalar,
    sum_scalar,
    sumsq_scalar,
    matmul_nn_scalar,
    matmul_nt_scalar,
    matmul_tn_scalar,
};
