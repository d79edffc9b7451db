// SPDX-License-Identifier: Apache-2.0
//
// Independent oracles used by the unit and acceptance suites. Everything here
// is deliberately brute force and shares no code path with the library
// implementations it checks.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mmfs/dataset.hpp"
#include "mmfs/kernel.hpp"
#include "mmfs/rng.hpp"

namespace mmfs::testing {

/// Gaussian elimination with partial pivoting; returns false on a (near-)
/// singular system. A and b are clobbered.
inline bool dense_solve(std::vector<std::vector<double>>& A, std::vector<double>& b) {
    const std::size_t n = A.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
        }
        if (std::abs(A[piv][col]) < 1e-11) return false;
        std::swap(A[piv], A[col]);
        std::swap(b[piv], b[col]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double factor = A[r][col] / A[col][col];
            for (std::size_t c = col; c < n; ++c) A[r][c] -= factor * A[col][c];
            b[r] -= factor * b[col];
        }
    }
    for (std::size_t col = n; col-- > 0;) {
        double acc = b[col];
        for (std::size_t c = col + 1; c < n; ++c) acc -= A[col][c] * b[c];
        b[col] = acc / A[col][col];
    }
    return true;
}

/// Brute-force solution of max e'a - 1/2 a'Ga s.t. y'a = 0, 0 <= a <= C by
/// enumerating all 3^n active-set patterns (free / at 0 / at C), solving the
/// bordered stationarity system on the free block and verifying the full KKT
/// conditions. The problem is concave, so any verified pattern is global.
struct QpOracleResult {
    double objective = 0.0;
    std::vector<double> alpha;
};

inline std::optional<QpOracleResult> qp_bruteforce(const Matrix& G, const std::vector<double>& y,
                                                   double C, double tol = 1e-7) {
    const std::size_t n = y.size();
    std::optional<QpOracleResult> best;

    std::vector<int> pattern(n, 0); // 0 = at zero, 1 = free, 2 = at C
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) total *= 3;

    for (std::size_t code = 0; code < total; ++code) {
        std::size_t rem = code;
        for (std::size_t i = 0; i < n; ++i) {
            pattern[i] = static_cast<int>(rem % 3);
            rem /= 3;
        }
        std::vector<int> free_idx;
        for (std::size_t i = 0; i < n; ++i) {
            if (pattern[i] == 1) free_idx.push_back(static_cast<int>(i));
        }

        std::vector<double> alpha(n, 0.0);
        double nu = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (pattern[i] == 2) alpha[i] = C;
        }

        if (!free_idx.empty()) {
            // [ G_FF  y_F ] [a_F]   [ e_F - G_FB a_B ]
            // [ y_F'   0  ] [nu ] = [ -y_B' a_B      ]
            const std::size_t d = free_idx.size() + 1;
            std::vector<std::vector<double>> A(d, std::vector<double>(d, 0.0));
            std::vector<double> rhs(d, 0.0);
            for (std::size_t a = 0; a < free_idx.size(); ++a) {
                const int i = free_idx[a];
                for (std::size_t b = 0; b < free_idx.size(); ++b) {
                    A[a][b] = G(i, free_idx[b]);
                }
                A[a][free_idx.size()] = y[i];
                double rhs_i = 1.0;
                for (std::size_t l = 0; l < n; ++l) {
                    if (pattern[l] != 1) rhs_i -= G(i, l) * alpha[l];
                }
                rhs[a] = rhs_i;
            }
            double bound_sum = 0.0;
            for (std::size_t l = 0; l < n; ++l) {
                if (pattern[l] != 1) bound_sum += y[l] * alpha[l];
            }
            for (std::size_t b = 0; b < free_idx.size(); ++b) {
                A[free_idx.size()][b] = y[free_idx[b]];
            }
            rhs[free_idx.size()] = -bound_sum;
            if (!dense_solve(A, rhs)) continue;
            bool box_ok = true;
            for (std::size_t a = 0; a < free_idx.size(); ++a) {
                alpha[free_idx[a]] = rhs[a];
                box_ok = box_ok && rhs[a] >= -tol && rhs[a] <= C + tol;
            }
            if (!box_ok) continue;
            nu = rhs[free_idx.size()];
        } else {
            double eq = 0.0;
            for (std::size_t l = 0; l < n; ++l) eq += y[l] * alpha[l];
            if (std::abs(eq) > tol) continue;
            // All-boundary pattern: nu only has to land in the interval the
            // sign conditions leave open. (0,+) and (C,-) give lower bounds,
            // (0,-) and (C,+) give upper bounds.
            const double window = 1.0 + C * static_cast<double>(n);
            double lo = -window;
            double hi = window;
            for (std::size_t i = 0; i < n; ++i) {
                double ga = 0.0;
                for (std::size_t l = 0; l < n; ++l) ga += G(i, l) * alpha[l];
                if ((pattern[i] == 0) == (y[i] > 0)) {
                    lo = std::max(lo, y[i] > 0 ? 1.0 - ga : ga - 1.0);
                } else {
                    hi = std::min(hi, y[i] > 0 ? 1.0 - ga : ga - 1.0);
                }
            }
            if (lo > hi + tol) continue;
            nu = 0.5 * (lo + hi);
        }

        // Full KKT verification.
        bool ok = true;
        for (std::size_t i = 0; i < n && ok; ++i) {
            double ga = 0.0;
            for (std::size_t l = 0; l < n; ++l) ga += G(i, l) * alpha[l];
            const double r = 1.0 - ga - nu * y[i];
            if (pattern[i] == 0) ok = r <= tol;          // lambda0 = -r >= 0
            else if (pattern[i] == 2) ok = r >= -tol;    // lambdaC = r >= 0
            else ok = std::abs(r) <= tol;
        }
        double eq = 0.0;
        for (std::size_t l = 0; l < n; ++l) eq += y[l] * alpha[l];
        ok = ok && std::abs(eq) <= tol * (1.0 + C * n);
        if (!ok) continue;

        double lin = 0.0;
        double quad = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            lin += alpha[i];
            for (std::size_t l = 0; l < n; ++l) quad += alpha[i] * G(i, l) * alpha[l];
        }
        const double obj = lin - 0.5 * quad;
        if (!best || obj > best->objective) best = QpOracleResult{obj, alpha};
    }
    return best;
}

/// Small random SVM instance for the oracle comparisons.
struct QpInstance {
    Dataset ds;
    KernelParams params;
    double C = 1.0;
};

inline QpInstance random_qp_instance(Rng& rng, int max_n = 8) {
    QpInstance inst;
    const int n = 3 + static_cast<int>(rng.uniform_below(max_n - 2));
    const int m = 2 + static_cast<int>(rng.uniform_below(3));
    inst.ds.X = Matrix(n, m);
    inst.ds.y.resize(n);
    for (int j = 0; j < m; ++j) inst.ds.feature_names.push_back("f" + std::to_string(j));
    bool has_pos = false;
    bool has_neg = false;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) inst.ds.X(i, j) = 2.0 * rng.uniform() - 1.0;
        inst.ds.y[i] = rng.uniform() < 0.5 ? -1.0 : 1.0;
        (inst.ds.y[i] > 0 ? has_pos : has_neg) = true;
    }
    if (!has_pos) inst.ds.y[0] = 1.0;
    if (!has_neg) inst.ds.y[n - 1] = -1.0;
    inst.params.gamma.resize(m);
    for (int j = 0; j < m; ++j) inst.params.gamma[j] = 5.0 * rng.uniform();
    const double cs[3] = {0.1, 1.0, 10.0};
    inst.C = cs[rng.uniform_below(3)];
    return inst;
}

/// Exhaustive vertex enumeration for the l1-SVM linear program
///   min sum u + C sum xi  s.t. u >= w, u >= -w, xi >= 0,
///                              xi_i + y_i(w'x_i + b) >= 1.
/// Only viable for a handful of points and features.
inline double l1_svm_lp_oracle(const Dataset& ds, double C) {
    const std::size_t n = ds.n_rows();
    const std::size_t m = ds.n_features();
    const std::size_t dim = 2 * m + 1 + n; // w, u, b, xi

    // rows: a'v >= rhs
    std::vector<std::vector<double>> rows;
    std::vector<double> rhs;
    for (std::size_t j = 0; j < m; ++j) {
        std::vector<double> r(dim, 0.0);
        r[m + j] = 1.0;
        r[j] = -1.0; // u_j - w_j >= 0
        rows.push_back(r);
        rhs.push_back(0.0);
        std::vector<double> r2(dim, 0.0);
        r2[m + j] = 1.0;
        r2[j] = 1.0; // u_j + w_j >= 0
        rows.push_back(r2);
        rhs.push_back(0.0);
    }
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> r(dim, 0.0);
        r[2 * m + 1 + i] = 1.0; // xi_i >= 0
        rows.push_back(r);
        rhs.push_back(0.0);
        std::vector<double> r2(dim, 0.0);
        for (std::size_t j = 0; j < m; ++j) r2[j] = ds.y[i] * ds.X(i, j);
        r2[2 * m] = ds.y[i];
        r2[2 * m + 1 + i] = 1.0; // xi_i + y_i(w'x_i + b) >= 1
        rows.push_back(r2);
        rhs.push_back(1.0);
    }

    std::vector<double> cost(dim, 0.0);
    for (std::size_t j = 0; j < m; ++j) cost[m + j] = 1.0;
    for (std::size_t i = 0; i < n; ++i) cost[2 * m + 1 + i] = C;

    double best = std::numeric_limits<double>::infinity();
    const std::size_t n_rows = rows.size();

    // iterate over all dim-subsets of constraints
    std::vector<std::size_t> idx(dim);
    for (std::size_t i = 0; i < dim; ++i) idx[i] = i;
    for (;;) {
        std::vector<std::vector<double>> A(dim, std::vector<double>(dim));
        std::vector<double> b(dim);
        for (std::size_t r = 0; r < dim; ++r) {
            A[r] = rows[idx[r]];
            b[r] = rhs[idx[r]];
        }
        if (dense_solve(A, b)) {
            bool feasible = true;
            for (std::size_t r = 0; r < n_rows && feasible; ++r) {
                double acc = 0.0;
                for (std::size_t c = 0; c < dim; ++c) acc += rows[r][c] * b[c];
                feasible = acc >= rhs[r] - 1e-8;
            }
            if (feasible) {
                double obj = 0.0;
                for (std::size_t c = 0; c < dim; ++c) obj += cost[c] * b[c];
                best = std::min(best, obj);
            }
        }
        // next combination
        std::size_t pos = dim;
        while (pos > 0) {
            --pos;
            if (idx[pos] != pos + n_rows - dim) break;
        }
        if (idx[pos] == pos + n_rows - dim) break;
        ++idx[pos];
        for (std::size_t r = pos + 1; r < dim; ++r) idx[r] = idx[r - 1] + 1;
    }
    if (!std::isfinite(best)) throw std::runtime_error("LP oracle found no feasible vertex");
    return best;
}

/// Spearman rank correlation; average ranks on ties.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    const auto ranks = [n](const std::vector<double>& v) {
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
            return v[x] < v[y];
        });
        std::vector<double> rank(n, 0.0);
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
            const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
            for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
            i = j + 1;
        }
        return rank;
    };
    const auto ra = ranks(a);
    const auto rb = ranks(b);
    double mean_a = 0.0;
    double mean_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_a += ra[i];
        mean_b += rb[i];
    }
    mean_a /= n;
    mean_b /= n;
    double cov = 0.0;
    double va = 0.0;
    double vb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        cov += (ra[i] - mean_a) * (rb[i] - mean_b);
        va += (ra[i] - mean_a) * (ra[i] - mean_a);
        vb += (rb[i] - mean_b) * (rb[i] - mean_b);
    }
    return cov / std::sqrt(va * vb);
}

} // namespace mmfs::testing
