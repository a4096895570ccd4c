// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

// Data-parallel inner loops behind the tensor engine. Every entry point has
// a scalar reference implementation and, on x86-64 builds, an AVX2+FMA
// variant selected once at startup. The two are equivalence-tested against
// each other in tests/test_kernels.cpp; the scalar path is the semantic
// reference.
//
// All matrices are row-major double with explicit leading dimensions so
// sub-views (attention heads, map rows) can be addressed without copies.
// The matmul kernels ACCUMULATE into C; callers zero C when they want a
// plain product. Gradient accumulation relies on this.

struct KernelTable {
    const char* name;

    // y[i] += a * x[i]
    void (*axpy)(size_t n, double a, const double* x, double* y);
    // y[i] = a * x[i]
    void (*scale)(size_t n, double a, const double* x, double* y);
    // z[i] = x[i] + y[i] / z[i] = x[i] - y[i] / z[i] = x[i] * y[i]
    void (*add)(size_t n, const double* x, const double* y, double* z);
    void (*sub)(size_t n, const double* x, const double* y, double* z);
    void (*mul)(size_t n, const double* x, const double* y, double* z);
    double (*dot)(size_t n, const double* x, const double* y);
    double (*sum)(size_t n, const double* x);
    double (*sumsq)(size_t n, const double* x);

    // C[m x n] += A[m x k] * B[k x n]
    void (*matmul_nn)(int m, int k, int n,
                      const double* a, int lda,
                      const double* b, int ldb,
                      double* c, int ldc);
    // C[m x n] += A[m x k] * B[n x k]^T
    void (*matmul_nt)(int m, int k, int n,
                      const double* a, int lda,
                      const double* b, int ldb,
                      double* c, int ldc);
    // C[k x n] += A[m x k]^T * B[m x n]
    void (*matmul_tn)(int m, int k, int n,
                      const double* a, int lda,
                      const double* b, int ldb,
                      double* c, int ldc);
};

extern const KernelTable kernels_scalar;
#if defined(GLYPHROUTE_BUILD_AVX2)
extern const KernelTable kernels_avx2;
#endif

// Dispatched table: AVX2 when the CPU supports it, scalar otherwise.
// GLYPHROUTE_KERNELS=scalar|avx2 in the environment overrides the choice
// (an unavailable request falls back to scalar).
const KernelTable& kernels();

// All tables compiled into this binary, for equivalence tests.
int available_kernel_tables(const KernelTable** out, int max_out);
