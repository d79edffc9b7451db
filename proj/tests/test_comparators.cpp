// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"

#include <cmath>

#include "mmfs/comparators.hpp"
#include "test_helpers.hpp"

using namespace mmfs;
using namespace mmfs::testing;

namespace {

Dataset tiny_instance() {
    // four points in 1-D, separable with margin
    Dataset ds;
    ds.X = Matrix(4, 1);
    ds.X(0, 0) = -1.0;
    ds.X(1, 0) = -0.5;
    ds.X(2, 0) = 0.5;
    ds.X(3, 0) = 1.0;
    ds.y = {-1.0, -1.0, 1.0, 1.0};
    ds.feature_names = {"x"};
    return ds;
}

} // namespace

TEST_CASE("l1 objective recomputation matches the invariant form") {
    const Dataset ds = tiny_instance();
    const LinearL1Solution sol = solve_l1_svm(ds, 5.0, 1e-7, 300'000);
    CHECK(std::abs(sol.objective - l1_objective(ds, sol.w, sol.b, 5.0)) <= 1e-8);
}

TEST_CASE("l1-SVM matches the LP oracle on small instances") {
    const Dataset ds = tiny_instance();
    for (const double C : {0.5, 2.0, 10.0}) {
        const double oracle = l1_svm_lp_oracle(ds, C);
        const LinearL1Solution sol = solve_l1_svm(ds, C, 1e-8, 400'000);
        CHECK(sol.objective <= oracle + 1e-4 * (1.0 + std::abs(oracle)));
        CHECK(sol.objective >= oracle - 1e-9); // cannot beat the optimum
    }

    // 2-feature instance where only the first feature is informative
    Dataset ds2;
    ds2.X = Matrix(4, 2);
    ds2.X(0, 0) = -1.0;
    ds2.X(0, 1) = 0.3;
    ds2.X(1, 0) = -0.6;
    ds2.X(1, 1) = -0.2;
    ds2.X(2, 0) = 0.7;
    ds2.X(2, 1) = 0.1;
    ds2.X(3, 0) = 1.0;
    ds2.X(3, 1) = -0.4;
    ds2.y = {-1.0, -1.0, 1.0, 1.0};
    ds2.feature_names = {"a", "b"};
    const double oracle2 = l1_svm_lp_oracle(ds2, 4.0);
    const LinearL1Solution sol2 = solve_l1_svm(ds2, 4.0, 1e-8, 400'000);
    CHECK(std::abs(sol2.objective - oracle2) <= 1e-4 * (1.0 + std::abs(oracle2)));
}

TEST_CASE("separable 1-D data with large C keeps a single nonzero weight") {
    const Dataset ds = tiny_instance();
    const LinearL1Solution sol = solve_l1_svm(ds, 50.0, 1e-8, 400'000);
    int nonzero = 0;
    for (const double w : sol.w) {
        if (std::abs(w) > 1e-2) ++nonzero;
    }
    CHECK(nonzero == 1);
    // the weight separates: w x + b has the right sign everywhere
    for (std::size_t i = 0; i < ds.n_rows(); ++i) {
        CHECK(ds.y[i] * (sol.w[0] * ds.X(i, 0) + sol.b) > 0.0);
    }
}

TEST_CASE("vanishing C collapses to the majority rule") {
    Dataset ds = tiny_instance();
    ds.y = {1.0, 1.0, 1.0, -1.0}; // majority +1
    const LinearL1Solution sol = solve_l1_svm(ds, 1e-6, 1e-8, 50'000);
    for (const double w : sol.w) CHECK(std::abs(w) <= 1e-4);
    CHECK(sol.b >= 0.0);
}

TEST_CASE("reported objective envelope decreases monotonically") {
    const Dataset ds = make_synthetic(30, 1, 2, 19, 3.0);
    std::vector<double> trace;
    solve_l1_svm(ds, 2.0, 1e-7, 20'000, [&](double v) { trace.push_back(v); });
    REQUIRE(trace.size() > 3);
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] + 1e-12);
}

TEST_CASE("comparator fold drivers produce sane rows") {
    const Dataset ds = make_synthetic(40, 2, 2, 23, 6.0);
    const FoldPlan plan = make_folds(ds.y, 4, 3);
    GridSpec grid;
    grid.C_values = {0.1, 1.0, 10.0};
    grid.gamma_values = {0.1, 1.0};
    grid.C2_values = {0.5};
    SolverSettings settings;
    settings.inner_k = 3;
    settings.seed = 1;
    settings.l1_max_iter_cv = 5000;
    settings.l1_max_iter_final = 20'000;

    const auto nofs = run_no_fs(ds, grid, plan, settings);
    REQUIRE(nofs.size() == 4);
    for (const auto& row : nofs) {
        CHECK(row.accuracy >= 0.5); // well-separated blobs
        CHECK(row.n_selected == 4);
    }

    const auto l1 = run_l1_svm(ds, grid, plan, settings);
    REQUIRE(l1.size() == 4);
    for (const auto& row : l1) {
        CHECK(row.accuracy >= 0.5);
        CHECK(row.n_selected >= 0);
        CHECK(row.n_selected <= 4);
    }
}
