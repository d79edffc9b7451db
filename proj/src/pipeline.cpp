// SPDX-License-Identifier: Apache-2.0

#include "mmfs/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "mmfs/parallel.hpp"
#include "mmfs/rng.hpp"
#include "mmfs/simd.hpp"

#include "json.hpp"

namespace mmfs {

namespace {

// Seed streams: 1 = outer folds (used by the CLI), 2 = inner CV per outer fold.
constexpr std::uint64_t kInnerFoldStream = 2;

// Warm starts whose stationarity residual exceeds this are flagged as
// insufficiently converged for warm-starting the NLP.
constexpr double kWarmResidualCap = 1e-4;

std::vector<double> decades(double lo_exp, double hi_exp) {
    std::vector<double> out;
    for (double e = lo_exp; e <= hi_exp + 0.5; e += 1.0) out.push_back(std::pow(10.0, e));
    return out;
}

} // namespace

GridSpec GridSpec::defaults() {
    GridSpec g;
    for (int e = -4; e <= -1; ++e) g.C_values.push_back(std::pow(10.0, e));
    for (int v = 1; v <= 9; ++v) g.C_values.push_back(static_cast<double>(v));
    for (int e = 1; e <= 4; ++e) g.C_values.push_back(std::pow(10.0, e));
    g.gamma_values = decades(-4, 4);
    g.C2_values = {0.01, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99};
    return g;
}

void GridSpec::validate() const {
    if (C_values.empty() || gamma_values.empty() || C2_values.empty()) {
        throw std::invalid_argument("grid must be nonempty");
    }
    const auto sorted = [](const std::vector<double>& v) {
        return std::is_sorted(v.begin(), v.end());
    };
    if (!sorted(C_values) || !sorted(gamma_values) || !sorted(C2_values)) {
        throw std::invalid_argument("grid values must be sorted ascending");
    }
    for (const double c2 : C2_values) {
        if (!(c2 >= 0.0 && c2 <= 1.0)) throw std::invalid_argument("C2 values must lie in [0,1]");
    }
}

InitialSolution initial_solution(const Dataset& trainval, const GridSpec& grid, int inner_k,
                                 std::uint64_t inner_seed, const SmoOptions& smo) {
    grid.validate();
    if (inner_k < 2) throw std::invalid_argument("inner fold count must be at least 2");

    const FoldPlan plan = make_folds(trainval.y, inner_k, inner_seed);
    const std::size_t n_gamma = grid.gamma_values.size();
    const std::size_t n_C = grid.C_values.size();
    std::vector<double> mean_acc(n_gamma * n_C, 0.0);

    for (int fold = 0; fold < inner_k; ++fold) {
        const Dataset tr = trainval.subset(plan.train_indices(fold));
        const Dataset val = trainval.subset(plan.test_indices(fold));
        const Matrix sq_tr = pairwise_sqdist(tr);
        const Matrix sq_cross = cross_sqdist(val, tr);

        for (std::size_t gi = 0; gi < n_gamma; ++gi) {
            const double gamma = grid.gamma_values[gi];
            const GramMatrices gm = gram_isotropic(sq_tr, tr.y, gamma);
            Matrix k_cross(val.n_rows(), tr.n_rows());
            for (std::size_t v = 0; v < val.n_rows(); ++v) {
                simd::scale(gamma, sq_cross.row(v), k_cross.row(v), tr.n_rows());
                simd::exp_neg(k_cross.row(v), k_cross.row(v), tr.n_rows());
            }
            for (std::size_t ci = 0; ci < n_C; ++ci) {
                const DualSolution sol = solve_dual(gm, tr.y, SvmHyper{grid.C_values[ci]}, smo);
                std::size_t correct = 0;
                for (std::size_t v = 0; v < val.n_rows(); ++v) {
                    double s = sol.bias;
                    for (const int t : sol.support_indices) {
                        s += sol.alpha[t] * tr.y[t] * k_cross(v, t);
                    }
                    const double pred = (s >= 0.0) ? 1.0 : -1.0;
                    if (pred == val.y[v]) ++correct;
                }
                mean_acc[gi * n_C + ci] +=
                    static_cast<double>(correct) / static_cast<double>(val.n_rows());
            }
        }
    }

    // Argmax with ties resolved toward the simpler model: smaller gamma first,
    // then smaller C (scan order makes the first maximum win).
    InitialSolution best;
    double best_acc = -1.0;
    for (std::size_t gi = 0; gi < n_gamma; ++gi) {
        for (std::size_t ci = 0; ci < n_C; ++ci) {
            const double acc = mean_acc[gi * n_C + ci];
            if (acc > best_acc) {
                best_acc = acc;
                best.gamma_init = grid.gamma_values[gi];
                best.C_star = grid.C_values[ci];
            }
        }
    }
    return best;
}

double evaluate_accuracy(const Dataset& test, const Dataset& train, const DualSolution& sol,
                         const KernelParams& params) {
    if (test.n_rows() == 0) throw std::invalid_argument("evaluate_accuracy: empty test set");
    if (test.n_features() != train.n_features()) {
        throw std::invalid_argument("evaluate_accuracy: feature count mismatch");
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.n_rows(); ++i) {
        const double s =
            score(train, sol, params, {test.X.row(i), test.n_features()}) + sol.bias;
        const double pred = (s >= 0.0) ? 1.0 : -1.0;
        if (pred == test.y[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(test.n_rows());
}

Matrix correlation_matrix(const Dataset& ds) {
    const std::size_t n = ds.n_rows();
    const std::size_t m = ds.n_features();
    if (n < 2) throw std::invalid_argument("correlation_matrix: need at least two rows");

    std::vector<double> mean(m, 0.0);
    std::vector<double> sd(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += ds.X(i, j);
        mean[j] = acc / static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = ds.X(i, j) - mean[j];
            var += d * d;
        }
        sd[j] = std::sqrt(var);
    }

    Matrix out(m, m);
    for (std::size_t a = 0; a < m; ++a) {
        out(a, a) = 1.0;
        for (std::size_t b = a + 1; b < m; ++b) {
            double cov = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                cov += (ds.X(i, a) - mean[a]) * (ds.X(i, b) - mean[b]);
            }
            const double denom = sd[a] * sd[b];
            const double rho = (denom == 0.0) ? 0.0 : cov / denom;
            out(a, b) = rho;
            out(b, a) = rho;
        }
    }
    return out;
}

namespace {

// Grid search plus warm start on ctx.trainval; everything downstream of the
// split that does not depend on C2.
void build_warm_start(FoldContext& ctx, const GridSpec& grid, const SolverSettings& settings) {
    ctx.init = initial_solution(ctx.trainval, grid, settings.inner_k,
                                derive_seed(settings.seed, kInnerFoldStream, ctx.fold),
                                settings.grid_smo);

    const KernelParams iso = KernelParams::isotropic(ctx.trainval.n_features(), ctx.init.gamma_init);
    const GramMatrices gm = gram(ctx.trainval, iso);
    const SvmHyper hyper{ctx.init.C_star};
    ctx.warm_dual = solve_dual(gm, ctx.trainval.y, hyper, settings.exact_smo);

    ctx.warm.gamma = iso.gamma;
    ctx.warm.alpha = ctx.warm_dual.alpha;
    if (settings.solve_eq17) {
        // Paper-literal route: solve the lower-level dual explicitly.
        MinMaxConfig base = settings.nlp;
        base.c2 = 0.0;
        const MinMaxPoint dual_pt = solve_lower_level_dual(ctx.trainval, iso, hyper.C, base);
        ctx.warm.alpha = dual_pt.alpha;
        ctx.warm.nu = dual_pt.nu;
        ctx.warm.lambda0 = dual_pt.lambda0;
        ctx.warm.lambdaC = dual_pt.lambdaC;
        ctx.warm_flagged = !ctx.warm_dual.converged || !dual_pt.converged;
    } else {
        const KktMultipliers mult = recover_multipliers(gm, ctx.trainval.y, ctx.warm_dual, hyper);
        ctx.warm.nu = mult.nu;
        ctx.warm.lambda0 = mult.lambda0;
        ctx.warm.lambdaC = mult.lambdaC;
        ctx.warm_flagged =
            !ctx.warm_dual.converged || mult.stationarity_residual > kWarmResidualCap;
    }
}

} // namespace

FoldContext prepare_fold(const Dataset& ds, const FoldPlan& plan, int fold, const GridSpec& grid,
                         const SolverSettings& settings) {
    FoldContext ctx;
    ctx.fold = fold;

    const auto train_idx = plan.train_indices(fold);
    const auto test_idx = plan.test_indices(fold);
    if (settings.paper_scaling) {
        const Dataset scaled = apply_scaling(ds, fit_scaling(ds));
        ctx.trainval = scaled.subset(train_idx);
        ctx.test = scaled.subset(test_idx);
    } else {
        const Dataset trainval_raw = ds.subset(train_idx);
        const ScalingSpec spec = fit_scaling(trainval_raw);
        ctx.trainval = apply_scaling(trainval_raw, spec);
        ctx.test = apply_scaling(ds.subset(test_idx), spec);
    }
    build_warm_start(ctx, grid, settings);
    return ctx;
}

FoldResult run_fold_nlp(const FoldContext& ctx, double C2, const SolverSettings& settings,
                        const MinMaxProblem::TraceFn& trace) {
    FoldResult res;
    res.fold = ctx.fold;
    res.C_star = ctx.init.C_star;
    res.gamma_init = ctx.init.gamma_init;

    MinMaxConfig cfg = settings.nlp;
    cfg.c2 = C2;
    cfg.C = ctx.init.C_star;
    MinMaxProblem problem(ctx.trainval, cfg, settings.pair_cache);
    res.point = problem.solve(ctx.warm, trace);

    // Re-globalize alpha: the convex dual is re-solved at the returned weights
    // and supplies the bias used on the test fold.
    const KernelParams params{res.point.gamma};
    const GramMatrices gm = gram(ctx.trainval, params);
    res.refit = solve_dual(gm, ctx.trainval.y, SvmHyper{ctx.init.C_star}, settings.exact_smo);
    res.accuracy = evaluate_accuracy(ctx.test, ctx.trainval, res.refit, params);

    const std::size_t m = res.point.gamma.size();
    res.rank.resize(m);
    std::iota(res.rank.begin(), res.rank.end(), 0);
    std::sort(res.rank.begin(), res.rank.end(), [&](int a, int b) {
        if (res.point.gamma[a] != res.point.gamma[b]) {
            return res.point.gamma[a] > res.point.gamma[b];
        }
        return a < b;
    });

    res.flagged = ctx.warm_flagged || !res.point.converged || !res.refit.converged;
    return res;
}

FoldResult run_fold(const Dataset& trainval, const Dataset& test, int fold, double C2,
                    const GridSpec& grid, const SolverSettings& settings) {
    FoldContext ctx;
    ctx.fold = fold;
    ctx.trainval = trainval;
    ctx.test = test;
    build_warm_start(ctx, grid, settings);
    return run_fold_nlp(ctx, C2, settings);
}

FrontierReport frontier(const Dataset& ds, const FoldPlan& plan, const GridSpec& grid,
                        const SolverSettings& settings, int jobs) {
    grid.validate();
    const int k = plan.k;

    std::vector<FoldContext> contexts(k);
    parallel_for(jobs, static_cast<std::size_t>(k), [&](std::size_t fold) {
        contexts[fold] = prepare_fold(ds, plan, static_cast<int>(fold), grid, settings);
    });

    FrontierReport report;
    report.c2_grid = grid.C2_values;
    const std::size_t n_c2 = grid.C2_values.size();
    report.results.assign(n_c2, std::vector<FoldResult>(k));
    parallel_for(jobs, n_c2 * static_cast<std::size_t>(k), [&](std::size_t task) {
        const std::size_t ci = task / k;
        const std::size_t fold = task % k;
        report.results[ci][fold] =
            run_fold_nlp(contexts[fold], grid.C2_values[ci], settings);
    });

    report.records.resize(n_c2);
    for (std::size_t ci = 0; ci < n_c2; ++ci) {
        FrontierRecord rec;
        rec.C2 = grid.C2_values[ci];
        double acc = 0.0;
        double norm = 0.0;
        double nsel = 0.0;
        for (const auto& fr : report.results[ci]) {
            acc += fr.accuracy;
            norm += simd::sum(fr.point.gamma.data(), fr.point.gamma.size());
            nsel += static_cast<double>(selected_features(fr.point, settings.threshold).size());
        }
        rec.mean_accuracy = acc / k;
        rec.mean_norm_gamma = norm / k;
        rec.mean_n_selected = nsel / k;
        report.records[ci] = rec;
    }
    return report;
}

RankingTable rank_stability(const FrontierReport& report) {
    RankingTable table;
    table.c2_grid = report.c2_grid;
    const std::size_t n_c2 = report.c2_grid.size();
    table.order.resize(n_c2);
    table.mean_rank.resize(n_c2);
    table.mean_gamma.resize(n_c2);

    for (std::size_t ci = 0; ci < n_c2; ++ci) {
        const auto& folds = report.results[ci];
        if (folds.empty()) continue;
        const std::size_t m = folds.front().point.gamma.size();
        std::vector<double> mean_rank(m, 0.0);
        std::vector<double> mean_gamma(m, 0.0);
        for (const auto& fr : folds) {
            for (std::size_t pos = 0; pos < m; ++pos) {
                mean_rank[fr.rank[pos]] += static_cast<double>(pos + 1);
            }
            for (std::size_t j = 0; j < m; ++j) mean_gamma[j] += fr.point.gamma[j];
        }
        for (std::size_t j = 0; j < m; ++j) {
            mean_rank[j] /= static_cast<double>(folds.size());
            mean_gamma[j] /= static_cast<double>(folds.size());
        }
        std::vector<int> order(m);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (mean_rank[a] != mean_rank[b]) return mean_rank[a] < mean_rank[b];
            return a < b;
        });
        table.order[ci] = std::move(order);
        table.mean_rank[ci] = std::move(mean_rank);
        table.mean_gamma[ci] = std::move(mean_gamma);
    }
    return table;
}

std::string FoldResult::to_json() const {
    nlohmann::json j;
    j["fold"] = fold;
    j["C_star"] = C_star;
    j["gamma_init"] = gamma_init;
    j["point"] = nlohmann::json::parse(point.to_json());
    j["refit"] = nlohmann::json::parse(refit.to_json());
    j["accuracy"] = accuracy;
    j["rank"] = rank;
    j["flagged"] = flagged;
    return j.dump(2);
}

} // namespace mmfs
