// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "glyphroute/kernels.hpp"
#include "glyphroute/rng.hpp"

namespace {

std::vector<double> random_vec(size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.gaussian();
    return v;
}

// Relative difference bound for comparing kernel variants; FMA contraction
// and blocked accumulation change the last bits only.
constexpr double kEquivTol = 1e-12;

void expect_close(double a, double b) {
    double scale = std::max({1.0, std::fabs(a), std::fabs(b)});
    CHECK(std::fabs(a - b) <= kEquivTol * scale);
}

}  // namespace

TEST_CASE("dispatch returns a usable table") {
    const auto& k = kernels();
    CHECK(k.name != nullptr);
    double x[3] = {1, 2, 3}, y[3] = {4, 5, 6}, z[3] = {0, 0, 0};
    k.add(3, x, y, z);
    CHECK(z[0] == 5.0);
    CHECK(z[2] == 9.0);
}

TEST_CASE("elementwise kernels agree across implementations") {
    const KernelTable* tables[4];
    int nt = available_kernel_tables(tables, 4);
    REQUIRE(nt >= 1);
    Rng rng(123);
    // Ragged sizes exercise the SIMD tails.
    for (size_t n : {size_t(1), size_t(3), size_t(4), size_t(7), size_t(64), size_t(1023)}) {
        auto x = random_vec(n, rng);
        auto y = random_vec(n, rng);
        for (int ti = 1; ti < nt; ti++) {
            std::vector<double> z0(n), z1(n);
            tables[0]->add(n, x.data(), y.data(), z0.data());
            tables[ti]->add(n, x.data(), y.data(), z1.data());
            CHECK(z0 == z1);

            tables[0]->sub(n, x.data(), y.data(), z0.data());
            tables[ti]->sub(n, x.data(), y.data(), z1.data());
            CHECK(z0 == z1);

            tables[0]->mul(n, x.data(), y.data(), z0.data());
            tables[ti]->mul(n, x.data(), y.data(), z1.data());
            CHECK(z0 == z1);

            tables[0]->scale(n, 1.7, x.data(), z0.data());
            tables[ti]->scale(n, 1.7, x.data(), z1.data());
            CHECK(z0 == z1);

            std::vector<double> a0(y), a1(y);
            tables[0]->axpy(n, -0.3, x.data(), a0.data());
            tables[ti]->axpy(n, -0.3, x.data(), a1.data());
            for (size_t i = 0; i < n; i++) expect_close(a0[i], a1[i]);

            expect_close(tables[0]->dot(n, x.data(), y.data()),
                         tables[ti]->dot(n, x.data(), y.data()));
            expect_close(tables[0]->sum(n, x.data()), tables[ti]->sum(n, x.data()));
            expect_close(tables[0]->sumsq(n, x.data()), tables[ti]->sumsq(n, x.data()));
        }
    }
}

TEST_CASE("matmul kernels agree across implementations and transposes") {
    const KernelTable* tables[4];
    int nt = available_kernel_tables(tables, 4);
    Rng rng(7);
    struct Dims {
        int m, k, n;
    };
    for (Dims d : {Dims{1, 1, 1}, Dims{2, 3, 5}, Dims{7, 9, 4}, Dims{16, 16, 16},
                   Dims{13, 31, 17}}) {
        auto a = random_vec(static_cast<size_t>(d.m) * d.k, rng);
        auto b = random_vec(static_cast<size_t>(d.k) * d.n, rng);
        auto bt = random_vec(static_cast<size_t>(d.n) * d.k, rng);
        auto at = random_vec(static_cast<size_t>(d.m) * d.k, rng);  // stored m x k, used ^T
        for (int ti = 1; ti < nt; ti++) {
            std::vector<double> c0(static_cast<size_t>(d.m) * d.n, 0.5);
            std::vector<double> c1(c0);
            tables[0]->matmul_nn(d.m, d.k, d.n, a.data(), d.k, b.data(), d.n, c0.data(), d.n);
            tables[ti]->matmul_nn(d.m, d.k, d.n, a.data(), d.k, b.data(), d.n, c1.data(), d.n);
            for (size_t i = 0; i < c0.size(); i++) expect_close(c0[i], c1[i]);

            std::fill(c0.begin(), c0.end(), -1.0);
            std::fill(c1.begin(), c1.end(), -1.0);
            tables[0]->matmul_nt(d.m, d.k, d.n, a.data(), d.k, bt.data(), d.k, c0.data(), d.n);
            tables[ti]->matmul_nt(d.m, d.k, d.n, a.data(), d.k, bt.data(), d.k, c1.data(), d.n);
            for (size_t i = 0; i < c0.size(); i++) expect_close(c0[i], c1[i]);

            std::vector<double> e0(static_cast<size_t>(d.k) * d.n, 0.0);
            std::vector<double> e1(e0);
            tables[0]->matmul_tn(d.m, d.k, d.n, at.data(), d.k, b.data() /*unused shape*/, d.n,
                                 e0.data(), d.n);
            tables[ti]->matmul_tn(d.m, d.k, d.n, at.data(), d.k, b.data(), d.n, e1.data(), d.n);
            for (size_t i = 0; i < e0.size(); i++) expect_close(e0[i], e1[i]);
        }
    }
}

TEST_CASE("matmul_nt/tn match matmul_nn on explicit transposes") {
    Rng rng(99);
    int m = 5, k = 7, n = 3;
    auto a = random_vec(static_cast<size_t>(m) * k, rng);
    auto b = random_vec(static_cast<size_t>(k) * n, rng);
    const auto& K = kernels();

    // Reference product.
    std::vector<double> c_ref(static_cast<size_t>(m) * n, 0.0);
    K.matmul_nn(m, k, n, a.data(), k, b.data(), n, c_ref.data(), n);

    // nt route: B^T stored explicitly.
    std::vector<double> bt(static_cast<size_t>(n) * k);
    for (int i = 0; i < k; i++) {
        for (int j = 0; j < n; j++) bt[static_cast<size_t>(j) * k + i] = b[static_cast<size_t>(i) * n + j];
    }
    std::vector<double> c_nt(static_cast<size_t>(m) * n, 0.0);
    K.matmul_nt(m, k, n, a.data(), k, bt.data(), k, c_nt.data(), n);
    for (size_t i = 0; i < c_ref.size(); i++) expect_close(c_ref[i], c_nt[i]);

    // tn route: A^T stored explicitly.
    std::vector<double> atr(static_cast<size_t>(k) * m);
    for (int i = 0; i < m; i++) {
        for (int j = 0; j < k; j++) atr[static_cast<size_t>(j) * m + i] = a[static_cast<size_t>(i) * k + j];
    }
    std::vector<double> c_tn(static_cast<size_t>(m) * n, 0.0);
    // (A^T)^T * B with A^T stored [k x m]: matmul_tn expects the stored matrix.
    K.matmul_tn(k, m, n, atr.data(), m, b.data() /*B has k rows*/, n, c_tn.data(), n);
    // Note: matmul_tn contracts over the stored row index, so feed B rows
    // aligned with A^T rows (both k).
    for (size_t i = 0; i < c_ref.size(); i++) expect_close(c_ref[i], c_tn[i]);
}

TEST_CASE("strided views: leading dimension larger than row width") {
    Rng rng(5);
    const auto& K = kernels();
    int m = 4, k = 6, n = 5;
    int lda = k + 3, ldb = n + 2, ldc = n + 4;
    auto a = random_vec(static_cast<size_t>(m) * lda, rng);
    auto b = random_vec(static_cast<size_t>(k) * ldb, rng);
    std::vector<double> c(static_cast<size_t>(m) * ldc, 0.0);
    K.matmul_nn(m, k, n, a.data(), lda, b.data(), ldb, c.data(), ldc);

    for (int i = 0; i < m; i++) {
        for (int j = 0; j < n; j++) {
            double acc = 0;
            for (int p = 0; p < k; p++) {
                acc += a[static_cast<size_t>(i) * lda + p] * b[static_cast<size_t>(p) * ldb + j];
            }
            expect_close(acc, c[static_cast<size_t>(i) * ldc + j]);
        }
    }
}
