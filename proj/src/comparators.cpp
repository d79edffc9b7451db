// SPDX-License-Identifier: Apache-2.0

#include "mmfs/comparators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mmfs/parallel.hpp"
#include "mmfs/rng.hpp"
#include "mmfs/simd.hpp"

namespace mmfs {

namespace {

constexpr std::uint64_t kInnerFoldStream = 2; // same split as the main pipeline

double soft_threshold(double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

double linear_margin(const Dataset& ds, std::size_t i, const std::vector<double>& w, double b) {
    return ds.y[i] * (simd::dot(ds.X.row(i), w.data(), w.size()) + b);
}

int count_selected(const std::vector<double>& w, double threshold) {
    int n = 0;
    for (const double v : w) {
        if (std::abs(v) > threshold) ++n;
    }
    return n;
}

double l1_accuracy(const Dataset& test, const std::vector<double>& w, double b) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.n_rows(); ++i) {
        const double s = simd::dot(test.X.row(i), w.data(), w.size()) + b;
        const double pred = (s >= 0.0) ? 1.0 : -1.0;
        if (pred == test.y[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(test.n_rows());
}

} // namespace

double l1_objective(const Dataset& ds, const std::vector<double>& w, double b, double C) {
    double norm = 0.0;
    for (const double v : w) norm += std::abs(v);
    double hinge = 0.0;
    for (std::size_t i = 0; i < ds.n_rows(); ++i) {
        hinge += std::max(0.0, 1.0 - linear_margin(ds, i, w, b));
    }
    return norm + C * hinge;
}

LinearL1Solution solve_l1_svm(const Dataset& ds, double C, double tol, long max_iter,
                              const std::function<void(double)>& report) {
    if (!(C > 0.0)) throw std::invalid_argument("solve_l1_svm: C must be positive");
    const std::size_t n = ds.n_rows();
    const std::size_t m = ds.n_features();

    LinearL1Solution best;
    best.w.assign(m, 0.0);
    best.b = 0.0;
    best.objective = l1_objective(ds, best.w, best.b, C);

    std::vector<double> grad(m, 0.0);
    constexpr long kCheckEvery = 50;
    constexpr int kStages = 4; // restarted diminishing schedule, step /5 per stage
    const double eta_base = 2.0 / (1.0 + C * static_cast<double>(n));
    double envelope = best.objective;

    long total_iters = 0;
    bool last_stage_settled = false;
    const long stage_budget = std::max<long>(1, max_iter / kStages);
    for (int stage = 0; stage < kStages; ++stage) {
        std::vector<double> w = best.w;
        double b = best.b;
        std::vector<double> w_avg = w;
        double b_avg = b;
        const double eta0 = eta_base * std::pow(0.2, stage);
        long stale_checks = 0;
        last_stage_settled = false;

        for (long t = 0; t < stage_budget; ++t, ++total_iters) {
            std::fill(grad.begin(), grad.end(), 0.0);
            double grad_b = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (linear_margin(ds, i, w, b) < 1.0) {
                    simd::axpy(-C * ds.y[i], ds.X.row(i), grad.data(), m);
                    grad_b -= C * ds.y[i];
                }
            }
            const double eta = eta0 / std::sqrt(static_cast<double>(t + 1));
            for (std::size_t j = 0; j < m; ++j) {
                w[j] = soft_threshold(w[j] - eta * grad[j], eta);
            }
            b -= eta * grad_b;

            const double inv = 1.0 / static_cast<double>(t + 2);
            for (std::size_t j = 0; j < m; ++j) w_avg[j] += (w[j] - w_avg[j]) * inv;
            b_avg += (b - b_avg) * inv;

            if ((t + 1) % kCheckEvery == 0) {
                const double obj_avg = l1_objective(ds, w_avg, b_avg, C);
                const double obj_raw = l1_objective(ds, w, b, C);
                const double improved_to =
                    std::min(best.objective - tol * (1.0 + std::abs(best.objective)),
                             best.objective);
                if (obj_avg < best.objective) {
                    best.objective = obj_avg;
                    best.w = w_avg;
                    best.b = b_avg;
                }
                if (obj_raw < best.objective) {
                    best.objective = obj_raw;
                    best.w = w;
                    best.b = b;
                }
                envelope = std::min(envelope, obj_avg);
                if (report) report(envelope);
                if (best.objective < improved_to) {
                    stale_checks = 0;
                } else if (++stale_checks >= 20 && t > 1000) {
                    last_stage_settled = true;
                    ++total_iters;
                    break;
                }
            }
        }
    }

    best.iterations = total_iters;
    best.converged = last_stage_settled || total_iters < max_iter;
    return best;
}

std::vector<ComparatorRow> run_no_fs(const Dataset& ds, const GridSpec& grid, const FoldPlan& plan,
                                     const SolverSettings& settings, int jobs) {
    grid.validate();
    std::vector<ComparatorRow> rows(plan.k);
    parallel_for(jobs, static_cast<std::size_t>(plan.k), [&](std::size_t fold) {
        const FoldContext ctx = prepare_fold(ds, plan, static_cast<int>(fold), grid, settings);
        ComparatorRow row;
        row.fold = static_cast<int>(fold);
        row.C_star = ctx.init.C_star;
        row.gamma_star = ctx.init.gamma_init;
        const KernelParams iso =
            KernelParams::isotropic(ctx.trainval.n_features(), ctx.init.gamma_init);
        row.accuracy = evaluate_accuracy(ctx.test, ctx.trainval, ctx.warm_dual, iso);
        row.n_selected = static_cast<int>(ds.n_features());
        row.flagged = !ctx.warm_dual.converged;
        rows[fold] = row;
    });
    return rows;
}

std::vector<ComparatorRow> run_l1_svm(const Dataset& ds, const GridSpec& grid, const FoldPlan& plan,
                                      const SolverSettings& settings, int jobs) {
    grid.validate();
    std::vector<ComparatorRow> rows(plan.k);
    parallel_for(jobs, static_cast<std::size_t>(plan.k), [&](std::size_t fold) {
        const auto train_idx = plan.train_indices(static_cast<int>(fold));
        const auto test_idx = plan.test_indices(static_cast<int>(fold));
        Dataset trainval;
        Dataset test;
        if (settings.paper_scaling) {
            const Dataset scaled = apply_scaling(ds, fit_scaling(ds));
            trainval = scaled.subset(train_idx);
            test = scaled.subset(test_idx);
        } else {
            const Dataset trainval_raw = ds.subset(train_idx);
            const ScalingSpec spec = fit_scaling(trainval_raw);
            trainval = apply_scaling(trainval_raw, spec);
            test = apply_scaling(ds.subset(test_idx), spec);
        }

        const FoldPlan inner = make_folds(
            trainval.y, settings.inner_k,
            derive_seed(settings.seed, kInnerFoldStream, static_cast<std::uint64_t>(fold)));

        double best_acc = -1.0;
        double best_C = grid.C_values.front();
        for (const double C : grid.C_values) {
            double acc = 0.0;
            for (int inner_fold = 0; inner_fold < settings.inner_k; ++inner_fold) {
                const Dataset tr = trainval.subset(inner.train_indices(inner_fold));
                const Dataset val = trainval.subset(inner.test_indices(inner_fold));
                const LinearL1Solution sol =
                    solve_l1_svm(tr, C, 1e-6, settings.l1_max_iter_cv);
                acc += l1_accuracy(val, sol.w, sol.b);
            }
            acc /= settings.inner_k;
            if (acc > best_acc) {
                best_acc = acc;
                best_C = C;
            }
        }

        const LinearL1Solution final_sol =
            solve_l1_svm(trainval, best_C, 1e-6, settings.l1_max_iter_final);
        ComparatorRow row;
        row.fold = static_cast<int>(fold);
        row.C_star = best_C;
        row.accuracy = l1_accuracy(test, final_sol.w, final_sol.b);
        row.n_selected = count_selected(final_sol.w, settings.threshold);
        row.flagged = false;
        rows[fold] = row;
    });
    return rows;
}

} // namespace mmfs
