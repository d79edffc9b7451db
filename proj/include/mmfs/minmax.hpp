// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "mmfs/dataset.hpp"
#include "mmfs/kernel.hpp"

namespace mmfs {

/// Configuration of the single-level feature-selection NLP
///
///   min over (gamma, alpha, nu, l0, lC) of
///     C2 ||gamma||_p^p - (1-C2) (1/2 a'G a - (e - nu y + l0 - lC)'a - C lC'e)
///   s.t. G a - (e - nu y + l0 - lC) = 0,
///        gamma, l0, lC >= 0,  0 <= a <= C,
///
/// solved by a method of multipliers: the equality block is absorbed into an
/// augmented Lagrangian and each subproblem is minimized over the boxed
/// variables by projected limited-memory quasi-Newton steps. The alpha box is
/// redundant at feasibility but kept; it demonstrably steadies the solver.
struct MinMaxConfig {
    double c2 = 0.5;   // complexity/accuracy trade-off in [0,1]
    double p = 1.0;    // norm exponent (> 0)
    double C = 1.0;    // SVM regularization constant
    double eq_tol = 1e-5;
    double opt_tol = 1e-5;
    int max_outer = 50;
    double penalty_init = 10.0;
    double penalty_growth = 10.0;
    int max_inner = 500;
    double rho_cap = 1e8;
    bool freeze_gamma = false; // pin gamma at its start value (lower-level dual solve)

    void validate(std::size_t n_features) const;
};

/// Iterate of the NLP. Box and sign constraints hold exactly on every point
/// the solver returns (projection-enforced).
struct MinMaxPoint {
    std::vector<double> gamma;
    std::vector<double> alpha;
    double nu = 0.0;
    std::vector<double> lambda0;
    std::vector<double> lambdaC;
    double objective = 0.0;    // value of the trade-off objective above
    double eq_residual = 0.0;  // inf-norm of the equality block
    double kkt_residual = 0.0; // projected-gradient inf-norm of the Lagrangian
    bool converged = false;

    std::string to_json() const;
    static MinMaxPoint from_json(const std::string& text);
};

struct MinMaxGradient {
    std::vector<double> gamma;
    std::vector<double> alpha;
    double nu = 0.0;
    std::vector<double> lambda0;
    std::vector<double> lambdaC;
};

/// Workspace bound to one dataset; reusable across trade-off values. Holds the
/// pairwise squared-difference store (the dominant memory cost, optional for
/// high-dimensional data) and the Gram cache.
class MinMaxProblem {
public:
    MinMaxProblem(const Dataset& ds, const MinMaxConfig& cfg, bool materialize_pairs = true);

    double objective(const MinMaxPoint& pt);
    double objective_and_gradient(const MinMaxPoint& pt, MinMaxGradient& grad);

    /// Residual of the equality block at pt.
    std::vector<double> constraint(const MinMaxPoint& pt);

    /// Product J'v of the equality-block Jacobian transpose with v.
    MinMaxGradient constraint_jtv(const MinMaxPoint& pt, const std::vector<double>& v);

    /// Called with exactly-feasible snapshots of accepted iterates (the
    /// multiplier slack absorbs the equality residual in closed form).
    using TraceFn = std::function<void(const MinMaxPoint&)>;

    MinMaxPoint solve(const MinMaxPoint& warm, const TraceFn& trace = nullptr);

    const MinMaxConfig& config() const { return cfg_; }

private:
    double eval(const std::vector<double>& x, const std::vector<double>* mu, double rho,
                std::vector<double>* grad_out);

    // Subproblem evaluation over (gamma, alpha, nu) only: the multiplier
    // blocks enter the augmented Lagrangian separably and strongly convexly,
    // so they are minimized exactly in closed form per evaluation (result in
    // lam0_/lamC_). By the envelope theorem the reduced gradient equals the
    // partial gradient at that minimizer.
    double eval_reduced(const std::vector<double>& xr, const std::vector<double>& mu, double rho,
                        std::vector<double>* grad_out);

    MinMaxPoint run_outer(const std::vector<double>& xr_start, double seed_fid,
                          const MinMaxPoint& seed_point, const TraceFn& trace);

    std::vector<double> to_flat(const MinMaxPoint& pt) const;
    MinMaxPoint from_flat(const std::vector<double>& x) const;

    const Dataset& ds_;
    MinMaxConfig cfg_;
    PairDiffs pairs_;
    std::size_t n_, m_, dim_, rdim_;
    std::vector<double> lower_, upper_;   // full layout [gamma | alpha | nu | l0 | lC]
    std::vector<double> rlower_, rupper_; // reduced layout [gamma | alpha | nu]

    // eval scratch; the last_* fields feed the O(n) feasibility polish
    GramMatrices gm_;
    std::vector<double> gamma_cached_;
    bool gram_valid_ = false;
    std::vector<double> galpha_, h_, u_, gu_, scratch_row_, lam0_, lamC_, pairc_;
    double last_aga_ = 0.0, last_norm_gamma_ = 0.0, last_lc_sum_ = 0.0;
};

/// Feasibility polish: absorb the equality residual into the sign-constrained
/// multipliers (l0 += max(h,0), lC += max(-h,0)), which zeroes the residual
/// without touching gamma or alpha.
MinMaxPoint feasibility_polish(const MinMaxPoint& pt, const std::vector<double>& h);

/// { j : gamma_j > threshold }.
std::vector<std::size_t> selected_features(const MinMaxPoint& pt, double threshold = 1e-2);

/// Paper-literal solve of the lower-level dual at fixed weights: minimizes the
/// same objective with c2 = 0 and gamma pinned, from the deterministic
/// feasible start (alpha = 0, nu = 0, l0 = 0, lC = e). Cross-checks the
/// closed-form multiplier recovery.
MinMaxPoint solve_lower_level_dual(const Dataset& ds, const KernelParams& params, double C,
                                   const MinMaxConfig& base = {});

} // namespace mmfs
