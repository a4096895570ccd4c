// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#include "glyphroute/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace {

bool cpu_has_avx2() {
#if defined(GLYPHROUTE_BUILD_AVX2) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable* select_table() {
    const char* want = std::getenv("GLYPHROUTE_KERNELS");
    if (want != nullptr && std::strcmp(want, "scalar") == 0) {
        return &kernels_scalar;
    }
#if defined(GLYPHROUTE_BUILD_AVX2)
    if (cpu_has_avx2()) {
        return &kernels_avx2;
    }
#endif
    (void)cpu_has_avx2;
    return &kernels_scalar;
}

}  // namespace

const KernelTable& kernels() {
    static const KernelTable* table = select_table();
    return *table;
}

int available_kernel_tables(const KernelTable** out, int max_out) {
    int count = 0;
    if (count < max_out) out[count++] = &kernels_scalar;
#if defined(GLYPHROUTE_BUILD_AVX2)
    if (cpu_has_avx2() && count < max_out) out[count++] = &kernels_avx2;
#endif
    return count;
}
