// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mmfs/dataset.hpp"
#include "mmfs/kernel.hpp"

namespace mmfs {

struct SvmHyper {
    double C = 1.0;
};

/// Solution of the box-and-equality-constrained kernel dual
///   max_a  e'a - 1/2 a'Ga   s.t.  y'a = 0,  0 <= a <= C.
struct DualSolution {
    std::vector<double> alpha;
    double bias = 0.0;
    double objective = 0.0;
    std::vector<int> support_indices; // { i : alpha_i > eps_sv }, eps_sv = 1e-8 C
    bool converged = false;
    double kkt_violation = 0.0;
    std::int64_t pair_updates = 0;

    std::string to_json() const;
    static DualSolution from_json(const std::string& text);
};

/// Multipliers of the dual's own constraints, recovered in closed form from
/// the stationarity identity e - G a - nu y + l0 - lC = 0.
struct KktMultipliers {
    double nu = 0.0;
    std::vector<double> lambda0;
    std::vector<double> lambdaC;
    double stationarity_residual = 0.0;
};

struct SmoOptions {
    double tol = 1e-8;                       // max KKT violation at exit
    std::int64_t max_updates = 10'000'000;   // working-pair update cap
};

/// Two-coordinate exchange (maximal-violating-pair selection). The equality
/// constraint is preserved exactly by every update. Hitting the update cap
/// returns the best iterate flagged non-converged rather than throwing.
///
/// Bias: mean of y_i - (G a)_i y_i over free support vectors; if none are
/// free, the midpoint of the KKT-feasible interval; if alpha == 0, the sign
/// of the majority label.
DualSolution solve_dual(const GramMatrices& gm, const std::vector<double>& y, SvmHyper hyper,
                        const SmoOptions& opts = {});

/// Score sum_i alpha_i y_i k(x_i, x); the predicted label is +1 iff
/// score + bias >= 0.
double score(const Dataset& ds_train, const DualSolution& sol, const KernelParams& params,
             std::span<const double> x);

KktMultipliers recover_multipliers(const GramMatrices& gm, const std::vector<double>& y,
                                   const DualSolution& sol, SvmHyper hyper);

/// Hinge slacks xi_i = max(0, 1 - y_i(score_i + bias)).
std::vector<double> recover_slacks(const GramMatrices& gm, const std::vector<double>& y,
                                   const DualSolution& sol);

/// 1/2 a'Ga + C sum xi. Matches the dual objective at an optimum.
double primal_objective(const GramMatrices& gm, const std::vector<double>& y,
                        const DualSolution& sol, SvmHyper hyper);

} // namespace mmfs
