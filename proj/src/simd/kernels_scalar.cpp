// SPDX-License-Identifier: Apache-2.0
//
// Scalar reference kernels. These define the semantics the SIMD variants are
// tested against: straight loops, left-to-right accumulation, no contraction
// (the build pins -ffp-contract=off for this library).

#include "mmfs/simd.hpp"

#include <cmath>

namespace mmfs::simd::detail {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double weighted_sqdist_scalar(const double* w, const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        acc += w[i] * (d * d);
    }
    return acc;
}

void axpy_scalar(double c, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += c * x[i];
}

void scale_scalar(double c, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = c * x[i];
}

double sum_scalar(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

void exp_neg_scalar(const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(-x[i]);
}

} // namespace

KernelTable scalar_table() {
    return {dot_scalar, weighted_sqdist_scalar, axpy_scalar, scale_scalar, sum_scalar,
            exp_neg_scalar, Backend::scalar};
}

} // namespace mmfs::simd::detail
