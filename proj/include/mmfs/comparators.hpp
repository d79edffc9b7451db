// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <vector>

#include "mmfs/dataset.hpp"
#include "mmfs/pipeline.hpp"

namespace mmfs {

/// Linear classifier minimizing ||w||_1 + C sum_i max(0, 1 - y_i(w'x_i + b)).
struct LinearL1Solution {
    std::vector<double> w;
    double b = 0.0;
    double objective = 0.0;
    bool converged = false;
    long iterations = 0;
};

/// Proximal subgradient descent with diminishing steps: hinge subgradient
/// step, then the l1 prox (soft threshold) on w. The reported objective is the
/// monotone envelope of evaluations at the running iterate average; `report`,
/// when set, receives that envelope at every check.
LinearL1Solution solve_l1_svm(const Dataset& ds, double C, double tol = 1e-6,
                              long max_iter = 60'000,
                              const std::function<void(double)>& report = nullptr);

double l1_objective(const Dataset& ds, const std::vector<double>& w, double b, double C);

struct ComparatorRow {
    int fold = 0;
    double accuracy = 0.0;
    int n_selected = 0;
    double C_star = 1.0;
    double gamma_star = 0.0; // isotropic weight (NO-FS only)
    bool flagged = false;
};

/// Isotropic-kernel baseline: the grid-search stage of the main pipeline
/// evaluated on the test fold; no feature is dropped.
std::vector<ComparatorRow> run_no_fs(const Dataset& ds, const GridSpec& grid, const FoldPlan& plan,
                                     const SolverSettings& settings, int jobs = 1);

/// l1-regularized linear baseline; C selected per fold by the same inner-CV
/// protocol, features counted at |w_j| > threshold.
std::vector<ComparatorRow> run_l1_svm(const Dataset& ds, const GridSpec& grid, const FoldPlan& plan,
                                      const SolverSettings& settings, int jobs = 1);

} // namespace mmfs
