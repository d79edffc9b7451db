// SPDX-License-Identifier: Apache-2.0

#include "mmfs/svm_dual.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mmfs/simd.hpp"

#include "json.hpp"

namespace mmfs {

namespace {

constexpr double kTau = 1e-12; // curvature floor for degenerate pairs

double sv_epsilon(double C) { return 1e-8 * C; }

// grad = G alpha - e, recomputed densely.
void refresh_gradient(const Matrix& G, const std::vector<double>& alpha, std::vector<double>& grad) {
    const std::size_t n = alpha.size();
    for (std::size_t t = 0; t < n; ++t) {
        grad[t] = simd::dot(G.row(t), alpha.data(), n) - 1.0;
    }
}

double majority_sign(const std::vector<double>& y) {
    double s = 0.0;
    for (const double v : y) s += v;
    return s >= 0.0 ? 1.0 : -1.0;
}

// Maximal-violating-pair selection. Returns false when optimal to tol.
bool select_pair(const std::vector<double>& alpha, const std::vector<double>& y,
                 const std::vector<double>& grad, double C, double tol, int& out_i, int& out_j,
                 double& out_violation) {
    const std::size_t n = alpha.size();
    double up_max = -std::numeric_limits<double>::infinity();
    double low_min = std::numeric_limits<double>::infinity();
    int i = -1;
    int j = -1;
    for (std::size_t t = 0; t < n; ++t) {
        const double v = -y[t] * grad[t];
        const bool in_up = (y[t] > 0) ? (alpha[t] < C) : (alpha[t] > 0);
        const bool in_low = (y[t] > 0) ? (alpha[t] > 0) : (alpha[t] < C);
        if (in_up && v > up_max) {
            up_max = v;
            i = static_cast<int>(t);
        }
        if (in_low && v < low_min) {
            low_min = v;
            j = static_cast<int>(t);
        }
    }
    if (i < 0 || j < 0) {
        out_violation = 0.0;
        return false;
    }
    out_violation = up_max - low_min;
    out_i = i;
    out_j = j;
    return out_violation > tol;
}

double compute_bias(const std::vector<double>& alpha, const std::vector<double>& y,
                    const std::vector<double>& grad, double C) {
    const double eps = sv_epsilon(C);
    double acc = 0.0;
    std::size_t n_free = 0;
    for (std::size_t t = 0; t < alpha.size(); ++t) {
        if (alpha[t] > eps && alpha[t] < C - eps) {
            acc += -y[t] * grad[t];
            ++n_free;
        }
    }
    if (n_free > 0) return acc / static_cast<double>(n_free);

    bool any_positive = false;
    for (const double a : alpha) {
        if (a > eps) {
            any_positive = true;
            break;
        }
    }
    if (!any_positive) return majority_sign(y);

    // Midpoint of the interval the boundary KKT conditions leave for the bias.
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < alpha.size(); ++t) {
        const double v = -y[t] * grad[t];
        const bool at_zero = alpha[t] <= eps;
        const bool at_C = alpha[t] >= C - eps;
        if ((y[t] > 0 && at_zero) || (y[t] < 0 && at_C)) lower = std::max(lower, v);
        if ((y[t] > 0 && at_C) || (y[t] < 0 && at_zero)) upper = std::min(upper, v);
    }
    if (!std::isfinite(lower)) return upper;
    if (!std::isfinite(upper)) return lower;
    return 0.5 * (lower + upper);
}

} // namespace

DualSolution solve_dual(const GramMatrices& gm, const std::vector<double>& y, SvmHyper hyper,
                        const SmoOptions& opts) {
    const std::size_t n = y.size();
    if (gm.G.rows() != n || gm.G.cols() != n) {
        throw std::invalid_argument("solve_dual: Gram matrix does not match label count");
    }
    if (!(hyper.C > 0.0) || !std::isfinite(hyper.C)) {
        throw std::invalid_argument("solve_dual: C must be positive and finite");
    }
    for (std::size_t t = 0; t < n * n; ++t) {
        if (!std::isfinite(gm.G.data()[t])) {
            throw std::invalid_argument("solve_dual: non-finite entry in Gram matrix");
        }
    }
    const double C = hyper.C;
    const Matrix& G = gm.G;

    std::vector<double> alpha(n, 0.0);
    std::vector<double> grad(n, -1.0); // G*0 - e

    DualSolution sol;
    sol.pair_updates = 0;
    double violation = 0.0;
    int i = -1;
    int j = -1;
    while (select_pair(alpha, y, grad, C, opts.tol, i, j, violation)) {
        if (sol.pair_updates >= opts.max_updates) break;
        ++sol.pair_updates;

        double quad = G(i, i) + G(j, j) - 2.0 * y[i] * y[j] * G(i, j);
        if (quad <= 0.0) quad = kTau;
        const double old_i = alpha[i];
        const double old_j = alpha[j];

        if (y[i] != y[j]) {
            const double delta = (-grad[i] - grad[j]) / quad;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0) {
                if (alpha[j] < 0) {
                    alpha[j] = 0;
                    alpha[i] = diff;
                }
            } else {
                if (alpha[i] < 0) {
                    alpha[i] = 0;
                    alpha[j] = -diff;
                }
            }
            if (diff > 0) {
                if (alpha[i] > C) {
                    alpha[i] = C;
                    alpha[j] = C - diff;
                }
            } else {
                if (alpha[j] > C) {
                    alpha[j] = C;
                    alpha[i] = C + diff;
                }
            }
        } else {
            const double delta = (grad[i] - grad[j]) / quad;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > C) {
                if (alpha[i] > C) {
                    alpha[i] = C;
                    alpha[j] = sum - C;
                }
            } else {
                if (alpha[j] < 0) {
                    alpha[j] = 0;
                    alpha[i] = sum;
                }
            }
            if (sum > C) {
                if (alpha[j] > C) {
                    alpha[j] = C;
                    alpha[i] = sum - C;
                }
            } else {
                if (alpha[i] < 0) {
                    alpha[i] = 0;
                    alpha[j] = sum;
                }
            }
        }

        const double di = alpha[i] - old_i;
        const double dj = alpha[j] - old_j;
        simd::axpy(di, G.row(i), grad.data(), n);
        simd::axpy(dj, G.row(j), grad.data(), n);
    }

    // Dense refresh before deriving bias, objective and the reported residual.
    refresh_gradient(G, alpha, grad);
    int ri = -1;
    int rj = -1;
    double final_violation = 0.0;
    const bool still_violating =
        select_pair(alpha, y, grad, C, opts.tol, ri, rj, final_violation);
    sol.converged = !still_violating;
    sol.kkt_violation = final_violation;

    sol.alpha = std::move(alpha);
    sol.bias = compute_bias(sol.alpha, y, grad, C);
    // e'a - 1/2 a'Ga == 1/2 (e'a - a'grad) with grad = Ga - e.
    const double ea = simd::sum(sol.alpha.data(), n);
    const double ag = simd::dot(sol.alpha.data(), grad.data(), n);
    sol.objective = 0.5 * (ea - ag);

    const double eps = sv_epsilon(C);
    for (std::size_t t = 0; t < n; ++t) {
        if (sol.alpha[t] > eps) sol.support_indices.push_back(static_cast<int>(t));
    }
    return sol;
}

double score(const Dataset& ds_train, const DualSolution& sol, const KernelParams& params,
             std::span<const double> x) {
    if (x.size() != ds_train.n_features()) throw std::invalid_argument("score: dimension mismatch");
    double acc = 0.0;
    for (const int i : sol.support_indices) {
        const double k = std::exp(-simd::weighted_sqdist(params.gamma.data(), ds_train.X.row(i),
                                                         x.data(), x.size()));
        acc += sol.alpha[i] * ds_train.y[i] * k;
    }
    return acc;
}

KktMultipliers recover_multipliers(const GramMatrices& gm, const std::vector<double>& y,
                                   const DualSolution& sol, SvmHyper hyper) {
    const std::size_t n = y.size();
    const double C = hyper.C;
    const double eps = sv_epsilon(C);

    KktMultipliers mult;
    mult.nu = sol.bias;
    mult.lambda0.assign(n, 0.0);
    mult.lambdaC.assign(n, 0.0);

    double residual = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = 1.0 - simd::dot(gm.G.row(i), sol.alpha.data(), n) - mult.nu * y[i];
        if (sol.alpha[i] <= eps) {
            mult.lambda0[i] = std::max(0.0, -r);
        } else if (sol.alpha[i] >= C - eps) {
            mult.lambdaC[i] = std::max(0.0, r);
        }
        residual = std::max(residual, std::abs(r + mult.lambda0[i] - mult.lambdaC[i]));
    }
    mult.stationarity_residual = residual;
    return mult;
}

std::vector<double> recover_slacks(const GramMatrices& gm, const std::vector<double>& y,
                                   const DualSolution& sol) {
    const std::size_t n = y.size();
    std::vector<double> xi(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double margin = simd::dot(gm.G.row(i), sol.alpha.data(), n) + y[i] * sol.bias;
        xi[i] = std::max(0.0, 1.0 - margin);
    }
    return xi;
}

double primal_objective(const GramMatrices& gm, const std::vector<double>& y,
                        const DualSolution& sol, SvmHyper hyper) {
    const std::size_t n = y.size();
    double quad = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        quad += sol.alpha[i] * simd::dot(gm.G.row(i), sol.alpha.data(), n);
    }
    const auto xi = recover_slacks(gm, y, sol);
    return 0.5 * quad + hyper.C * simd::sum(xi.data(), n);
}

std::string DualSolution::to_json() const {
    nlohmann::json j;
    j["alpha"] = alpha;
    j["bias"] = bias;
    j["objective"] = objective;
    j["support_indices"] = support_indices;
    j["converged"] = converged;
    j["kkt_violation"] = kkt_violation;
    j["pair_updates"] = pair_updates;
    return j.dump();
}

DualSolution DualSolution::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    DualSolution sol;
    sol.alpha = j.at("alpha").get<std::vector<double>>();
    sol.bias = j.at("bias").get<double>();
    sol.objective = j.at("objective").get<double>();
    sol.support_indices = j.at("support_indices").get<std::vector<int>>();
    sol.converged = j.at("converged").get<bool>();
    sol.kkt_violation = j.at("kkt_violation").get<double>();
    sol.pair_updates = j.at("pair_updates").get<std::int64_t>();
    return sol;
}

} // namespace mmfs
