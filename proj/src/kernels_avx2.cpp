// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#include "glyphroute/kernels.hpp"

#include <immintrin.h>

// AVX2 + FMA variants. 4 doubles per lane; ragged tails handled scalar.
// Results may differ from the scalar table in the last bits (FMA contraction,
// blocked accumulation order); the equivalence test bounds the difference.

namespace {

void axpy_avx2(size_t n, double a, const double* x, double* y) {
    size_t n4 = n & ~size_t(3);
    __m256d va = _mm256_set1_pd(a);
    for (size_t i = 0; i < n4; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
        _mm256_storeu_pd(y + i, vy);
    }
    for (size_t i = n4; i < n; i++) y[i] += a * x[i];
}

void scale_avx2(size_t n, double a, const double* x, double* y) {
    size_t n4 = n & ~size_t(3);
    __m256d va = _mm256_set1_pd(a);
    for (size_t i = 0; i < n4; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    }
    for (size_t i = n4; i < n; i++) y[i] = a * x[i];
}

void add_avx2(size_t n, const double* x, const double* y, double* z) {
    size_t n4 = n & ~size_t(3);
    for (size_t i = 0; i < n4; i += 4) {
        _mm256_storeu_pd(z + i, _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (size_t i = n4; i < n; i++) z[i] = x[i] + y[i];
}

void sub_avx2(size_t n, const double* x, const double* y, double* z) {
    size_t n4 = n & ~size_t(3);
    for (size_t i = 0; i < n4; i += 4) {
        _mm256_storeu_pd(z + i, _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (size_t i = n4; i < n; i++) z[i] = x[i] - y[i];
}

void mul_avx2(size_t n, const double* x, const double* y, double* z) {
    size_t n4 = n & ~size_t(3);
    for (size_t i = 0; i < n4; i += 4) {
        _mm256_storeu_pd(z + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (size_t i = n4; i < n; i++) z[i] = x[i] * y[i];
}

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swapped = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

double dot_avx2(size_t n, const double* x, const double* y) {
    size_t n16 = n & ~size_t(15);
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    __m256d acc2 = _mm256_setzero_pd();
    __m256d acc3 = _mm256_setzero_pd();
    for (size_t i = 0; i < n16; i += 16) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
        acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 8), _mm256_loadu_pd(y + i + 8), acc2);
        acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 12), _mm256_loadu_pd(y + i + 12), acc3);
    }
    size_t n4 = n & ~size_t(3);
    for (size_t i = n16; i < n4; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    }
    double total = hsum(_mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3)));
    for (size_t i = n4; i < n; i++) total += x[i] * y[i];
    return total;
}

double sum_avx2(size_t n, const double* x) {
    size_t n4 = n & ~size_t(3);
    __m256d acc = _mm256_setzero_pd();
    for (size_t i = 0; i < n4; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    double total = hsum(acc);
    for (size_t i = n4; i < n; i++) total += x[i];
    return total;
}

double sumsq_avx2(size_t n, const double* x) {
    size_t n4 = n & ~size_t(3);
    __m256d acc = _mm256_setzero_pd();
    for (size_t i = 0; i < n4; i += 4) {
        __m256d v = _mm256_loadu_pd(x + i);
        acc = _mm256_fmadd_pd(v, v, acc);
    }
    double total = hsum(acc);
    for (size_t i = n4; i < n; i++) total += x[i] * x[i];
    return total;
}

void matmul_nn_avx2(int m, int k, int n,
                    const double* a, int lda,
                    const double* b, int ldb,
                    double* c, int ldc) {
    int n4 = n & ~3;
    for (int i = 0; i < m; i++) {
        const double* ai = a + static_cast<size_t>(i) * lda;
        double* ci = c + static_cast<size_t>(i) * ldc;
        for (int p = 0; p < k; p++) {
            __m256d aip = _mm256_set1_pd(ai[p]);
            const double* bp = b + static_cast<size_t>(p) * ldb;
            int j = 0;
            for (; j < n4; j += 4) {
                __m256d vc = _mm256_loadu_pd(ci + j);
                vc = _mm256_fmadd_pd(aip, _mm256_loadu_pd(bp + j), vc);
                _mm256_storeu_pd(ci + j, vc);
            }
            for (; j < n; j++) ci[j] += ai[p] * bp[j];
        }
    }
}

void matmul_nt_avx2(int m, int k, int n,
                    const double* a, int lda,
                    const double* b, int ldb,
                    double* c, int ldc) {
    for (int i = 0; i < m; i++) {
        const double* ai = a + static_cast<size_t>(i) * lda;
        double* ci = c + static_cast<size_t>(i) * ldc;
        for (int j = 0; j < n; j++) {
            ci[j] += dot_avx2(static_cast<size_t>(k), ai, b + static_cast<size_t>(j) * ldb);
        }
    }
}

void matmul_tn_avx2(int m, int k, int n,
                    const double* a, int lda,
                    const double* b, int ldb,
                    double* c, int ldc) {
    int n4 = n & ~3;
    for (int i = 0; i < m; i++) {
        const double* ai = a + static_cast<size_t>(i) * lda;
        const double* bi = b + static_cast<size_t>(i) * ldb;
        for (int p = 0; p < k; p++) {
            __m256d aip = _mm256_set1_pd(ai[p]);
            double* cp = c + static_cast<size_t>(p) * ldc;
            int j = 0;
            for (; j < n4; j += 4) {
                __m256d vc = _mm256_loadu_pd(cp + j);
                vc = _mm256_fmadd_pd(aip, _mm256_loadu_pd(bi + j), vc);
                _mm256_storeu_pd(cp + j, vc);
            }
            for (; j < n; j++) cp[j] += ai[p] * bi[j];
        }
    }
}

}  // namespace

const KernelTable kernels_avx2 = {
    "avx2",
    axpy_avx2,
    scale_avx2,
    add_avx2,
    sub_avx2,
    mul_avx2,
    dot_avx2,
    sum_avx2,
    sumsq_avx2,
    matmul_nn_avx2,
    matmul_nt_avx2,
    matmul_tn_avx2,
};
