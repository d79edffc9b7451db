// SPDX-License-Identifier: Apache-2.0

#include "mmfs/simd.hpp"

#include <cstdlib>
#include <cstring>

namespace mmfs::simd {

namespace {

using detail::KernelTable;

bool backend_available(Backend b) {
    switch (b) {
    case Backend::scalar:
        return true;
#if defined(MMFS_HAVE_AVX2)
    case Backend::avx2:
        return detail::avx2_supported();
#endif
#if defined(MMFS_HAVE_NEON)
    case Backend::neon:
        return true;
#endif
    default:
        return false;
    }
}

KernelTable table_for(Backend b) {
    switch (b) {
#if defined(MMFS_HAVE_AVX2)
    case Backend::avx2:
        return detail::avx2_table();
#endif
#if defined(MMFS_HAVE_NEON)
    case Backend::neon:
        return detail::neon_table();
#endif
    default:
        return detail::scalar_table();
    }
}

Backend pick_default() {
    const char* env = std::getenv("MMFS_SIMD");
    if (env != nullptr && std::strcmp(env, "auto") != 0) {
        if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
        if (std::strcmp(env, "avx2") == 0 && backend_available(Backend::avx2)) return Backend::avx2;
        if (std::strcmp(env, "neon") == 0 && backend_available(Backend::neon)) return Backend::neon;
        return Backend::scalar;
    }
#if defined(MMFS_HAVE_AVX2)
    if (backend_available(Backend::avx2)) return Backend::avx2;
#endif
#if defined(MMFS_HAVE_NEON)
    if (backend_available(Backend::neon)) return Backend::neon;
#endif
    return Backend::scalar;
}

KernelTable& table() {
    static KernelTable t = table_for(pick_default());
    return t;
}

} // namespace

Backend active_backend() { return table().backend; }

std::string_view backend_name() {
    switch (active_backend()) {
    case Backend::avx2:
        return "avx2";
    case Backend::neon:
        return "neon";
    default:
        return "scalar";
    }
}

bool set_backend(Backend b) {
    if (!backend_available(b)) return false;
    table() = table_for(b);
    return true;
}

double dot(const double* a, const double* b, std::size_t n) { return table().dot(a, b, n); }

double weighted_sqdist(const double* w, const double* a, const double* b, std::size_t n) {
    return table().weighted_sqdist(w, a, b, n);
}

void axpy(double c, const double* x, double* y, std::size_t n) { table().axpy(c, x, y, n); }

void scale(double c, const double* x, double* y, std::size_t n) { table().scale(c, x, y, n); }

double sum(const double* x, std::size_t n) { return table().sum(x, n); }

void exp_neg(const double* x, double* out, std::size_t n) { table().exp_neg(x, out, n); }

} // namespace mmfs::simd
