// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"

#include <cmath>
#include <limits>

#include "mmfs/svm_dual.hpp"
#include "test_helpers.hpp"

using namespace mmfs;
using namespace mmfs::testing;

namespace {

// Two points on a line, opposite labels, unit weight: the equality constraint
// forces a1 = a2 = t and the objective 2t - t^2 (1 - e^-4) peaks at
// t = 1/(1 - e^-4).
struct TwoPoint {
    Dataset ds;
    GramMatrices gm;
    SvmHyper hyper{10.0};
    double t_star = 1.0 / (1.0 - std::exp(-4.0));

    TwoPoint() {
        ds.X = Matrix(2, 1);
        ds.X(0, 0) = -1.0;
        ds.X(1, 0) = 1.0;
        ds.y = {-1.0, 1.0};
        ds.feature_names = {"x"};
        gm = gram(ds, KernelParams{{1.0}});
    }
};

} // namespace

TEST_CASE("single-class sample forces alpha to zero and majority bias") {
    Dataset ds;
    ds.X = Matrix(3, 1);
    ds.X(0, 0) = 0.0;
    ds.X(1, 0) = 1.0;
    ds.X(2, 0) = 2.0;
    ds.y = {1.0, 1.0, 1.0};
    ds.feature_names = {"x"};
    const GramMatrices gm = gram(ds, KernelParams{{1.0}});

    const DualSolution sol = solve_dual(gm, ds.y, SvmHyper{1.0});
    CHECK(sol.converged);
    for (const double a : sol.alpha) CHECK(a == 0.0);
    CHECK(sol.objective == 0.0);
    CHECK(sol.bias == 1.0);
    CHECK(sol.support_indices.empty());
}

TEST_CASE("two-point instance matches the closed form") {
    TwoPoint tp;
    const DualSolution sol = solve_dual(tp.gm, tp.ds.y, tp.hyper);
    CHECK(sol.converged);
    CHECK(sol.alpha[0] == doctest::Approx(tp.t_star).epsilon(1e-8));
    CHECK(sol.alpha[1] == doctest::Approx(tp.t_star).epsilon(1e-8));
    CHECK(sol.alpha[0] == doctest::Approx(1.018657).epsilon(1e-5));
    CHECK(sol.bias == doctest::Approx(0.0).epsilon(1e-9));

    // objective at the optimum equals t* (= 2t - t^2(1-e^-4) at t = t*)
    CHECK(sol.objective == doctest::Approx(tp.t_star).epsilon(1e-9));

    // score at the midpoint is zero and ties classify as +1
    const std::vector<double> mid{0.0};
    const double s = score(tp.ds, sol, KernelParams{{1.0}}, mid);
    CHECK(s == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(s + sol.bias >= 0.0);
}

TEST_CASE("objective matches brute force on random small instances") {
    Rng rng(2024);
    int checked = 0;
    for (int trial = 0; trial < 12; ++trial) {
        const QpInstance inst = random_qp_instance(rng);
        const GramMatrices gm = gram(inst.ds, inst.params);
        const auto oracle = qp_bruteforce(gm.G, inst.ds.y, inst.C);
        REQUIRE(oracle.has_value());
        const DualSolution sol = solve_dual(gm, inst.ds.y, SvmHyper{inst.C});
        CHECK(sol.converged);
        CHECK(std::abs(sol.objective - oracle->objective) <= 1e-6);
        ++checked;
    }
    CHECK(checked == 12);
}

TEST_CASE("equality constraint and box hold at the solution") {
    Rng rng(99);
    for (int trial = 0; trial < 8; ++trial) {
        const QpInstance inst = random_qp_instance(rng);
        const GramMatrices gm = gram(inst.ds, inst.params);
        const DualSolution sol = solve_dual(gm, inst.ds.y, SvmHyper{inst.C});
        double eq = 0.0;
        for (std::size_t i = 0; i < inst.ds.n_rows(); ++i) {
            eq += sol.alpha[i] * inst.ds.y[i];
            CHECK(sol.alpha[i] >= 0.0);
            CHECK(sol.alpha[i] <= inst.C);
        }
        CHECK(std::abs(eq) <= 1e-10 * (1.0 + inst.C * inst.ds.n_rows()));
    }
}

TEST_CASE("strong duality on converged solves") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const QpInstance inst = random_qp_instance(rng);
        const GramMatrices gm = gram(inst.ds, inst.params);
        const DualSolution sol = solve_dual(gm, inst.ds.y, SvmHyper{inst.C});
        REQUIRE(sol.converged);
        const double primal = primal_objective(gm, inst.ds.y, sol, SvmHyper{inst.C});
        CHECK(std::abs(primal - sol.objective) <= 1e-6 * (1.0 + std::abs(sol.objective)));
    }
}

TEST_CASE("recovered multipliers satisfy stationarity and complementarity") {
    TwoPoint tp;
    const DualSolution sol = solve_dual(tp.gm, tp.ds.y, tp.hyper);
    const KktMultipliers mult = recover_multipliers(tp.gm, tp.ds.y, sol, tp.hyper);
    CHECK(mult.nu == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(mult.lambda0[0] == 0.0);
    CHECK(mult.lambda0[1] == 0.0);
    CHECK(mult.lambdaC[0] == 0.0);
    CHECK(mult.lambdaC[1] == 0.0);
    CHECK(mult.stationarity_residual <= 1e-8);

    Rng rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        const QpInstance inst = random_qp_instance(rng);
        const GramMatrices gm = gram(inst.ds, inst.params);
        const DualSolution s = solve_dual(gm, inst.ds.y, SvmHyper{inst.C});
        const KktMultipliers m = recover_multipliers(gm, inst.ds.y, s, SvmHyper{inst.C});
        CHECK(m.stationarity_residual <= 10 * 1e-8 + 1e-10);
        const double eps = 1e-8 * inst.C;
        for (std::size_t i = 0; i < inst.ds.n_rows(); ++i) {
            CHECK(m.lambda0[i] >= 0.0);
            CHECK(m.lambdaC[i] >= 0.0);
            CHECK(m.lambda0[i] * s.alpha[i] <= 1e-6 * (1.0 + inst.C));
            CHECK(m.lambdaC[i] * (inst.C - s.alpha[i]) <= 1e-6 * (1.0 + inst.C));
            if (s.alpha[i] > eps && s.alpha[i] < inst.C - eps) {
                CHECK(m.lambda0[i] == 0.0);
                CHECK(m.lambdaC[i] == 0.0);
            }
        }
    }
}

TEST_CASE("slack recovery: separable data has zero slack, unit hinge arithmetic") {
    TwoPoint tp;
    const DualSolution sol = solve_dual(tp.gm, tp.ds.y, tp.hyper);
    const auto xi = recover_slacks(tp.gm, tp.ds.y, sol);
    for (const double v : xi) CHECK(v <= 1e-8);

    // hinge arithmetic on constructed margins: with alpha = 0 the margin is
    // y_i * bias, so bias = -1 puts point 1 (y = +1) at margin -1, slack 2
    DualSolution fake;
    fake.alpha = {0.0, 0.0};
    fake.bias = -1.0;
    const auto xi2 = recover_slacks(tp.gm, tp.ds.y, fake);
    CHECK(xi2[0] == 0.0); // y = -1: margin +1
    CHECK(xi2[1] == 2.0); // y = +1: margin -1
}

TEST_CASE("score degeneracies") {
    TwoPoint tp;
    DualSolution zero;
    zero.alpha = {0.0, 0.0};
    zero.bias = 1.0;
    const std::vector<double> x{0.37};
    CHECK(score(tp.ds, zero, KernelParams{{1.0}}, x) == 0.0);

    // gamma = 0: score collapses to sum alpha_i y_i = 0 by the constraint
    const GramMatrices flat = gram(tp.ds, KernelParams{{0.0}});
    const DualSolution sol = solve_dual(flat, tp.ds.y, SvmHyper{1.0});
    CHECK(score(tp.ds, sol, KernelParams{{0.0}}, x) ==
          doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("iteration cap reports a flagged best iterate") {
    TwoPoint tp;
    SmoOptions opts;
    opts.max_updates = 0;
    const DualSolution sol = solve_dual(tp.gm, tp.ds.y, tp.hyper, opts);
    CHECK(!sol.converged);
    CHECK(sol.kkt_violation > 0.0);
    CHECK(sol.alpha == std::vector<double>{0.0, 0.0});
}

TEST_CASE("non-finite Gram entries are rejected") {
    TwoPoint tp;
    GramMatrices bad = tp.gm;
    bad.G(0, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS(solve_dual(bad, tp.ds.y, tp.hyper));
}

TEST_CASE("dual solution JSON round-trip") {
    TwoPoint tp;
    const DualSolution sol = solve_dual(tp.gm, tp.ds.y, tp.hyper);
    const DualSolution back = DualSolution::from_json(sol.to_json());
    CHECK(back.alpha == sol.alpha);
    CHECK(back.bias == sol.bias);
    CHECK(back.objective == sol.objective);
    CHECK(back.support_indices == sol.support_indices);
    CHECK(back.converged == sol.converged);
}
