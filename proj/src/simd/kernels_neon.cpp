// SPDX-License-Identifier: Apache-2.0
//
// NEON variants (aarch64). Two 2-wide accumulator streams for reductions;
// elementwise kernels match the scalar reference bit-for-bit (vmlaq is not
// used so no fused multiply-add sneaks in).

#include "mmfs/simd.hpp"

#if defined(MMFS_HAVE_NEON)

#include <arm_neon.h>

#include <cmath>

namespace mmfs::simd::detail {

namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = vaddq_f64(acc0, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
        acc1 = vaddq_f64(acc1, vmulq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2)));
    }
    double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double weighted_sqdist_neon(const double* w, const double* a, const double* b, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t d = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
        acc0 = vaddq_f64(acc0, vmulq_f64(vld1q_f64(w + i), vmulq_f64(d, d)));
    }
    double acc = vaddvq_f64(acc0);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        acc += w[i] * (d * d);
    }
    return acc;
}

void axpy_neon(double c, const double* x, double* y, std::size_t n) {
    const float64x2_t vc = vdupq_n_f64(c);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t prod = vmulq_f64(vc, vld1q_f64(x + i));
        vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), prod));
    }
    for (; i < n; ++i) y[i] += c * x[i];
}

void scale_neon(double c, const double* x, double* y, std::size_t n) {
    const float64x2_t vc = vdupq_n_f64(c);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vmulq_f64(vc, vld1q_f64(x + i)));
    for (; i < n; ++i) y[i] = c * x[i];
}

void exp_neg_neon(const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(-x[i]);
}

double sum_neon(const double* x, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) acc0 = vaddq_f64(acc0, vld1q_f64(x + i));
    double acc = vaddvq_f64(acc0);
    for (; i < n; ++i) acc += x[i];
    return acc;
}

} // namespace

KernelTable neon_table() {
    return {dot_neon, weighted_sqdist_neon, axpy_neon, scale_neon, sum_neon, exp_neg_neon,
            Backend::neon};
}

} // namespace mmfs::simd::detail

#endif // MMFS_HAVE_NEON
