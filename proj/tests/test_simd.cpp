// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"

#include <cmath>
#include <vector>

#include "mmfs/rng.hpp"
#include "mmfs/simd.hpp"

using namespace mmfs;
using simd::Backend;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo = -2.0, double hi = 2.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = lo + (hi - lo) * rng.uniform();
    return v;
}

struct BackendGuard {
    Backend prev;
    BackendGuard() : prev(simd::active_backend()) {}
    ~BackendGuard() { simd::set_backend(prev); }
};

} // namespace

TEST_CASE("simd variants agree with the scalar reference") {
    BackendGuard guard;
    Rng rng(7);

    for (const Backend b : {Backend::avx2, Backend::neon}) {
        if (!simd::set_backend(b)) continue;
        CAPTURE(static_cast<int>(b));

        // odd lengths exercise every tail path
        for (const std::size_t n : {1UL, 3UL, 4UL, 7UL, 16UL, 33UL, 130UL, 1021UL}) {
            const auto a = random_vec(rng, n);
            const auto c = random_vec(rng, n);
            const auto w = random_vec(rng, n, 0.0, 3.0);

            simd::set_backend(Backend::scalar);
            const double dot_ref = simd::dot(a.data(), c.data(), n);
            const double wsq_ref = simd::weighted_sqdist(w.data(), a.data(), c.data(), n);
            const double sum_ref = simd::sum(a.data(), n);
            std::vector<double> axpy_ref = c;
            simd::axpy(0.37, a.data(), axpy_ref.data(), n);
            std::vector<double> scale_ref(n);
            simd::scale(-1.75, a.data(), scale_ref.data(), n);

            simd::set_backend(b);
            CHECK(simd::dot(a.data(), c.data(), n) ==
                  doctest::Approx(dot_ref).epsilon(1e-13));
            CHECK(simd::weighted_sqdist(w.data(), a.data(), c.data(), n) ==
                  doctest::Approx(wsq_ref).epsilon(1e-13));
            CHECK(simd::sum(a.data(), n) == doctest::Approx(sum_ref).epsilon(1e-13));

            // elementwise kernels must match bit-for-bit
            std::vector<double> axpy_simd = c;
            simd::axpy(0.37, a.data(), axpy_simd.data(), n);
            CHECK(axpy_simd == axpy_ref);
            std::vector<double> scale_simd(n);
            simd::scale(-1.75, a.data(), scale_simd.data(), n);
            CHECK(scale_simd == scale_ref);

            // exp_neg agrees with libm to a few ulp across the useful range
            std::vector<double> args(n);
            for (std::size_t i = 0; i < n; ++i) {
                args[i] = (i % 5 == 0) ? 0.0 : 710.0 * rng.uniform();
            }
            std::vector<double> expv(n);
            simd::exp_neg(args.data(), expv.data(), n);
            for (std::size_t i = 0; i < n; ++i) {
                const double ref = std::exp(-args[i]);
                CHECK(std::abs(expv[i] - ref) <= 1e-14 * ref + 1e-300);
            }
        }
    }
}

TEST_CASE("dispatch reports a valid backend and scalar is always available") {
    BackendGuard guard;
    CHECK(simd::set_backend(Backend::scalar));
    CHECK(simd::active_backend() == Backend::scalar);
    CHECK(simd::backend_name() == "scalar");
}
