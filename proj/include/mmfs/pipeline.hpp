// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmfs/dataset.hpp"
#include "mmfs/kernel.hpp"
#include "mmfs/minmax.hpp"
#include "mmfs/svm_dual.hpp"

namespace mmfs {

/// Hyperparameter grids. Defaults: C in {1e-4..1e-1, 1..9, 10..1e4}, isotropic
/// gamma over the decades 1e-4..1e4, trade-off grid {0.01, 0.1, ..., 0.9, 0.99}.
struct GridSpec {
    std::vector<double> C_values;
    std::vector<double> gamma_values;
    std::vector<double> C2_values;

    static GridSpec defaults();
    void validate() const;
};

/// Everything the experiment drivers need beyond the grids. All tolerances and
/// caps live here so a run is fully described by (dataset, plan, grid, this).
struct SolverSettings {
    SmoOptions grid_smo{1e-6, 200'000};      // inner-CV grid solves
    SmoOptions exact_smo{1e-8, 10'000'000};  // warm-start and refit solves
    MinMaxConfig nlp;                        // c2 and C are set per run
    double threshold = 1e-2;                 // relevance cut on gamma_j
    int inner_k = 5;
    std::uint64_t seed = 0;
    bool paper_scaling = false; // scale on the full sample before splitting
    bool solve_eq17 = false;    // initial multipliers from the explicit dual solve
    bool pair_cache = true;     // materialize squared differences per pair
    long l1_max_iter_cv = 20'000;
    long l1_max_iter_final = 60'000;
};

struct InitialSolution {
    double C_star = 1.0;
    double gamma_init = 1.0;
};

/// Grid search of the isotropic-kernel SVM by stratified inner cross
/// validation; ties broken toward smaller gamma, then smaller C.
InitialSolution initial_solution(const Dataset& trainval, const GridSpec& grid, int inner_k,
                                 std::uint64_t inner_seed, const SmoOptions& smo);

/// Per-fold output of the full solving strategy.
struct FoldResult {
    int fold = 0;
    double C_star = 1.0;
    double gamma_init = 1.0;
    MinMaxPoint point;
    DualSolution refit;
    double accuracy = 0.0;
    std::vector<int> rank; // feature indices by descending weight, ties by index
    bool flagged = false;  // any stage reported non-convergence

    std::string to_json() const;
};

/// Fraction of test points classified correctly by sign(score + bias).
double evaluate_accuracy(const Dataset& test, const Dataset& train, const DualSolution& sol,
                         const KernelParams& params);

/// Pearson correlations of the raw feature columns; constant features
/// contribute zero off-diagonal.
Matrix correlation_matrix(const Dataset& ds);

/// Intermediate state shared by every trade-off value within one fold: the
/// split, the grid-search result and the warm start (none of which depend on
/// C2), so a frontier sweep computes them once per fold.
struct FoldContext {
    int fold = 0;
    Dataset trainval;
    Dataset test;
    InitialSolution init;
    MinMaxPoint warm;
    DualSolution warm_dual;
    bool warm_flagged = false;
};

FoldContext prepare_fold(const Dataset& ds, const FoldPlan& plan, int fold, const GridSpec& grid,
                         const SolverSettings& settings);

FoldResult run_fold_nlp(const FoldContext& ctx, double C2, const SolverSettings& settings,
                        const MinMaxProblem::TraceFn& trace = nullptr);

/// The four stages end to end on one split: grid search, warm start, the
/// single-level solve, and the re-globalizing refit evaluated on the test fold.
FoldResult run_fold(const Dataset& trainval, const Dataset& test, int fold, double C2,
                    const GridSpec& grid, const SolverSettings& settings);

struct FrontierRecord {
    double C2 = 0.0;
    double mean_accuracy = 0.0;
    double mean_norm_gamma = 0.0;
    double mean_n_selected = 0.0;
};

struct FrontierReport {
    std::vector<double> c2_grid;
    std::vector<FrontierRecord> records;          // one per C2
    std::vector<std::vector<FoldResult>> results; // [c2][fold]
};

/// Full sweep: every (C2, fold) cell of the grid. `jobs <= 1` runs serially;
/// parallel runs produce identical results (tasks are independent and the
/// reduction order is fixed).
FrontierReport frontier(const Dataset& ds, const FoldPlan& plan, const GridSpec& grid,
                        const SolverSettings& settings, int jobs = 1);

/// Mean-rank feature ordering per trade-off value.
struct RankingTable {
    std::vector<double> c2_grid;
    std::vector<std::vector<int>> order;          // [c2][position] = feature index
    std::vector<std::vector<double>> mean_rank;   // [c2][feature]
    std::vector<std::vector<double>> mean_gamma;  // [c2][feature]
};

RankingTable rank_stability(const FrontierReport& report);

} // namespace mmfs
