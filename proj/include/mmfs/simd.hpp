// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string_view>

// Runtime-dispatched vector kernels for the dense inner loops (Gram assembly,
// weighted squared distances, solver updates). One scalar reference
// implementation plus SIMD variants selected once per process; the variant in
// use is fixed for the lifetime of the process unless overridden, so repeated
// runs on the same machine are reproducible.
//
// Reductions (dot, weighted_sqdist, sum) accumulate in lane order and may
// differ from the scalar reference in the last few ulps; elementwise kernels
// (axpy, scale) are bit-identical to the reference.

namespace mmfs::simd {

enum class Backend { scalar, avx2, neon };

// Backend chosen at startup: highest supported, overridable with the
// MMFS_SIMD environment variable ("scalar", "avx2", "neon", "auto").
Backend active_backend();
std::string_view backend_name();

// Force a backend (used by the equivalence tests). Returns false and leaves
// the dispatch table unchanged if the CPU does not support the request.
bool set_backend(Backend b);

// sum_i a[i] * b[i]
double dot(const double* a, const double* b, std::size_t n);

// sum_i w[i] * (a[i] - b[i])^2
double weighted_sqdist(const double* w, const double* a, const double* b, std::size_t n);

// y[i] += c * x[i]
void axpy(double c, const double* x, double* y, std::size_t n);

// y[i] = c * x[i]
void scale(double c, const double* x, double* y, std::size_t n);

// sum_i x[i]
double sum(const double* x, std::size_t n);

// out[i] = exp(-x[i]). The SIMD variants use a polynomial expansion accurate
// to a few ulp; the scalar reference defers to libm.
void exp_neg(const double* x, double* out, std::size_t n);

namespace detail {

struct KernelTable {
    double (*dot)(const double*, const double*, std::size_t);
    double (*weighted_sqdist)(const double*, const double*, const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*scale)(double, const double*, double*, std::size_t);
    double (*sum)(const double*, std::size_t);
    void (*exp_neg)(const double*, double*, std::size_t);
    Backend backend;
};

KernelTable scalar_table();
#if defined(MMFS_HAVE_AVX2)
KernelTable avx2_table();
bool avx2_supported();
#endif
#if defined(MMFS_HAVE_NEON)
KernelTable neon_table();
#endif

} // namespace detail

} // namespace mmfs::simd
