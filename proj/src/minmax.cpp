// SPDX-License-Identifier: Apache-2.0

#include "mmfs/minmax.hpp"

#include <cstdio>
#include <cstdlib>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

#include "mmfs/simd.hpp"

#include "json.hpp"

namespace mmfs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kArmijo = 1e-4;
constexpr double kSubgradCap = 1e6; // |d/dgamma ||gamma||_p^p| cap for p < 1 at 0

double norm_p(const double* g, std::size_t m, double p) {
    if (p == 1.0) return simd::sum(g, m);
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) acc += std::pow(g[j], p);
    return acc;
}

double norm_p_derivative(double g, double p) {
    if (p == 1.0) return 1.0;
    if (p > 1.0) return p * std::pow(g, p - 1.0);
    // p < 1: the derivative blows up at 0; clamp (documented convention).
    return std::min(kSubgradCap, p * std::pow(std::max(g, 1e-12), p - 1.0));
}

// Limited-memory BFGS buffer with the usual curvature guard.
class LbfgsMemory {
public:
    explicit LbfgsMemory(std::size_t dim, int mem = 20) : dim_(dim), mem_(mem) {}

    void clear() { pairs_.clear(); }

    void push(const std::vector<double>& s, const std::vector<double>& yv) {
        const double sy = simd::dot(s.data(), yv.data(), dim_);
        const double ss = simd::dot(s.data(), s.data(), dim_);
        const double yy = simd::dot(yv.data(), yv.data(), dim_);
        if (!(sy > 1e-10 * std::sqrt(ss * yy))) return;
        if (static_cast<int>(pairs_.size()) == mem_) pairs_.erase(pairs_.begin());
        pairs_.push_back({s, yv, 1.0 / sy});
    }

    // d = -H g, two-loop recursion seeded with a diagonal H0. The diagonal
    // carries the known per-block curvature of the augmented Lagrangian (the
    // multiplier blocks are exactly rho-stiff), which keeps the subproblems
    // well conditioned as the penalty grows.
    void direction(const std::vector<double>& g, const std::vector<double>& h0_diag,
                   std::vector<double>& d) const {
        d.assign(g.begin(), g.end());
        std::vector<double> coeff(pairs_.size());
        for (std::size_t k = pairs_.size(); k-- > 0;) {
            const auto& pr = pairs_[k];
            coeff[k] = pr.rho * simd::dot(pr.s.data(), d.data(), dim_);
            simd::axpy(-coeff[k], pr.yv.data(), d.data(), dim_);
        }
        for (std::size_t i = 0; i < dim_; ++i) d[i] *= h0_diag[i];
        for (std::size_t k = 0; k < pairs_.size(); ++k) {
            const auto& pr = pairs_[k];
            const double beta = pr.rho * simd::dot(pr.yv.data(), d.data(), dim_);
            simd::axpy(coeff[k] - beta, pr.s.data(), d.data(), dim_);
        }
        for (auto& v : d) v = -v;
    }

    bool empty() const { return pairs_.empty(); }

    // Inverse-curvature estimate from the newest pair (s'y / y'y).
    double bb_scale() const {
        if (pairs_.empty()) return 1.0;
        const auto& last = pairs_.back();
        const double yy = simd::dot(last.yv.data(), last.yv.data(), dim_);
        return 1.0 / (last.rho * yy);
    }

private:
    struct Pair {
        std::vector<double> s, yv;
        double rho;
    };
    std::size_t dim_;
    int mem_;
    std::vector<Pair> pairs_;
};

} // namespace

void MinMaxConfig::validate(std::size_t) const {
    if (!(c2 >= 0.0 && c2 <= 1.0)) throw std::invalid_argument("c2 must lie in [0,1]");
    if (!(p > 0.0)) throw std::invalid_argument("norm exponent p must be positive");
    if (!(C > 0.0) || !std::isfinite(C)) throw std::invalid_argument("C must be positive and finite");
    if (!(eq_tol > 0.0) || !(opt_tol > 0.0)) throw std::invalid_argument("tolerances must be positive");
}

MinMaxProblem::MinMaxProblem(const Dataset& ds, const MinMaxConfig& cfg, bool materialize_pairs)
    : ds_(ds), cfg_(cfg), pairs_(ds.X, materialize_pairs), n_(ds.n_rows()), m_(ds.n_features()) {
    cfg_.validate(m_);
    dim_ = m_ + 3 * n_ + 1;
    lower_.assign(dim_, 0.0);
    upper_.assign(dim_, kInf);
    std::fill(upper_.begin() + m_, upper_.begin() + m_ + n_, cfg_.C); // alpha box
    lower_[m_ + n_] = -kInf;                                          // nu free
    rdim_ = m_ + n_ + 1;
    rlower_.assign(rdim_, 0.0);
    rupper_.assign(rdim_, kInf);
    std::fill(rupper_.begin() + m_, rupper_.begin() + m_ + n_, cfg_.C);
    rlower_[m_ + n_] = -kInf;
    galpha_.resize(n_);
    h_.resize(n_);
    u_.resize(n_);
    gu_.resize(n_);
    scratch_row_.resize(m_);
    lam0_.resize(n_);
    lamC_.resize(n_);
    pairc_.resize(pairs_.n_pairs());
}

std::vector<double> MinMaxProblem::to_flat(const MinMaxPoint& pt) const {
    std::vector<double> x(dim_);
    std::copy(pt.gamma.begin(), pt.gamma.end(), x.begin());
    std::copy(pt.alpha.begin(), pt.alpha.end(), x.begin() + m_);
    x[m_ + n_] = pt.nu;
    std::copy(pt.lambda0.begin(), pt.lambda0.end(), x.begin() + m_ + n_ + 1);
    std::copy(pt.lambdaC.begin(), pt.lambdaC.end(), x.begin() + m_ + 2 * n_ + 1);
    return x;
}

MinMaxPoint MinMaxProblem::from_flat(const std::vector<double>& x) const {
    MinMaxPoint pt;
    pt.gamma.assign(x.begin(), x.begin() + m_);
    pt.alpha.assign(x.begin() + m_, x.begin() + m_ + n_);
    pt.nu = x[m_ + n_];
    pt.lambda0.assign(x.begin() + m_ + n_ + 1, x.begin() + m_ + 2 * n_ + 1);
    pt.lambdaC.assign(x.begin() + m_ + 2 * n_ + 1, x.end());
    return pt;
}

double MinMaxProblem::eval(const std::vector<double>& x, const std::vector<double>* mu, double rho,
                           std::vector<double>* grad_out) {
    const double* gamma = x.data();
    const double* alpha = x.data() + m_;
    const double nu = x[m_ + n_];
    const double* l0 = x.data() + m_ + n_ + 1;
    const double* lC = x.data() + m_ + 2 * n_ + 1;
    const double c2 = cfg_.c2;
    const double w = 1.0 - c2;

    if (!gram_valid_ || gamma_cached_.size() != m_ ||
        std::memcmp(gamma_cached_.data(), gamma, m_ * sizeof(double)) != 0) {
        gamma_cached_.assign(gamma, gamma + m_);
        gram_from_pairs(pairs_, ds_.y, gamma_cached_, gm_);
        gram_valid_ = true;
    }

    for (std::size_t i = 0; i < n_; ++i) {
        galpha_[i] = simd::dot(gm_.G.row(i), alpha, n_);
    }
    for (std::size_t i = 0; i < n_; ++i) {
        h_[i] = galpha_[i] - 1.0 + nu * ds_.y[i] - l0[i] + lC[i];
    }

    const double aga = simd::dot(alpha, galpha_.data(), n_);
    const double ah = simd::dot(alpha, h_.data(), n_);
    const double sa = aga - ah; // s'a with s = G a - h
    const double lc_sum = simd::sum(lC, n_);
    const double norm_gamma = norm_p(gamma, m_, cfg_.p);
    last_aga_ = aga;
    last_norm_gamma_ = norm_gamma;
    last_lc_sum_ = lc_sum;

    const double f = c2 * norm_gamma - w * (0.5 * aga - sa - cfg_.C * lc_sum);
    double phi = f;
    if (mu != nullptr) {
        phi += simd::dot(mu->data(), h_.data(), n_) + 0.5 * rho * simd::dot(h_.data(), h_.data(), n_);
    }

    if (grad_out != nullptr) {
        std::vector<double>& g = *grad_out;
        g.assign(dim_, 0.0);
        bool has_u = false;
        for (std::size_t i = 0; i < n_; ++i) {
            u_[i] = (mu != nullptr ? (*mu)[i] : 0.0) + rho * h_[i];
            has_u = has_u || u_[i] != 0.0;
        }
        if (has_u) {
            for (std::size_t i = 0; i < n_; ++i) gu_[i] = simd::dot(gm_.G.row(i), u_.data(), n_);
        } else {
            std::fill(gu_.begin(), gu_.end(), 0.0);
        }

        // gamma block: norm term plus one weighted pass over the pair store.
        for (std::size_t j = 0; j < m_; ++j) g[j] = c2 * norm_p_derivative(gamma[j], cfg_.p);
        {
            // per-pair coefficients, then one contraction per feature lane
            double* ggamma = g.data();
            std::size_t p = 0;
            for (std::size_t i = 0; i < n_; ++i) {
                const double ai = alpha[i];
                const double ui = u_[i];
                const double* Grow = gm_.G.row(i);
                for (std::size_t l = i + 1; l < n_; ++l, ++p) {
                    pairc_[p] = Grow[l] * (w * ai * alpha[l] - ui * alpha[l] - u_[l] * ai);
                }
            }
            if (pairs_.materialized()) {
                const std::size_t np = pairs_.n_pairs();
                for (std::size_t j = 0; j < m_; ++j) {
                    ggamma[j] += simd::dot(pairc_.data(), pairs_.lane(j), np);
                }
            } else {
                p = 0;
                for (std::size_t i = 0; i < n_; ++i) {
                    for (std::size_t l = i + 1; l < n_; ++l, ++p) {
                        if (pairc_[p] != 0.0) {
                            simd::axpy(pairc_[p], pairs_.row(i, l, scratch_row_.data()), ggamma,
                                       m_);
                        }
                    }
                }
            }
        }

        double ya = 0.0;
        double yu = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            ya += ds_.y[i] * alpha[i];
            yu += ds_.y[i] * u_[i];
        }
        double* galpha_grad = g.data() + m_;
        double* gl0 = g.data() + m_ + n_ + 1;
        double* glC = g.data() + m_ + 2 * n_ + 1;
        for (std::size_t i = 0; i < n_; ++i) {
            galpha_grad[i] = -w * h_[i] + gu_[i];
            gl0[i] = w * alpha[i] - u_[i];
            glC[i] = w * (cfg_.C - alpha[i]) + u_[i];
        }
        g[m_ + n_] = -w * ya + yu;
    }
    return phi;
}

double MinMaxProblem::objective(const MinMaxPoint& pt) {
    const double f = eval(to_flat(pt), nullptr, 0.0, nullptr);
    if (!std::isfinite(f)) throw std::runtime_error("non-finite objective value");
    return f;
}

double MinMaxProblem::objective_and_gradient(const MinMaxPoint& pt, MinMaxGradient& grad) {
    std::vector<double> g;
    const double f = eval(to_flat(pt), nullptr, 0.0, &g);
    if (!std::isfinite(f)) throw std::runtime_error("non-finite objective value");
    grad.gamma.assign(g.begin(), g.begin() + m_);
    grad.alpha.assign(g.begin() + m_, g.begin() + m_ + n_);
    grad.nu = g[m_ + n_];
    grad.lambda0.assign(g.begin() + m_ + n_ + 1, g.begin() + m_ + 2 * n_ + 1);
    grad.lambdaC.assign(g.begin() + m_ + 2 * n_ + 1, g.end());
    return f;
}

std::vector<double> MinMaxProblem::constraint(const MinMaxPoint& pt) {
    eval(to_flat(pt), nullptr, 0.0, nullptr);
    return h_;
}

MinMaxGradient MinMaxProblem::constraint_jtv(const MinMaxPoint& pt, const std::vector<double>& v) {
    if (v.size() != n_) throw std::invalid_argument("constraint_jtv: vector length mismatch");
    // J'v equals the gradient of mu'h at mu = v, i.e. eval with c2 weights
    // removed. Obtain it as grad(phi; mu=v, rho=0) minus grad(f).
    std::vector<double> g_full;
    std::vector<double> g_f;
    eval(to_flat(pt), &v, 0.0, &g_full);
    eval(to_flat(pt), nullptr, 0.0, &g_f);
    MinMaxGradient out;
    out.gamma.resize(m_);
    out.alpha.resize(n_);
    out.lambda0.resize(n_);
    out.lambdaC.resize(n_);
    for (std::size_t j = 0; j < m_; ++j) out.gamma[j] = g_full[j] - g_f[j];
    for (std::size_t i = 0; i < n_; ++i) {
        out.alpha[i] = g_full[m_ + i] - g_f[m_ + i];
        out.lambda0[i] = g_full[m_ + n_ + 1 + i] - g_f[m_ + n_ + 1 + i];
        out.lambdaC[i] = g_full[m_ + 2 * n_ + 1 + i] - g_f[m_ + 2 * n_ + 1 + i];
    }
    out.nu = g_full[m_ + n_] - g_f[m_ + n_];
    return out;
}

MinMaxPoint feasibility_polish(const MinMaxPoint& pt, const std::vector<double>& h) {
    MinMaxPoint out = pt;
    for (std::size_t i = 0; i < h.size(); ++i) {
        out.lambda0[i] += std::max(h[i], 0.0);
        out.lambdaC[i] += std::max(-h[i], 0.0);
    }
    out.eq_residual = 0.0;
    return out;
}

std::vector<std::size_t> selected_features(const MinMaxPoint& pt, double threshold) {
    if (!(threshold > 0.0)) throw std::invalid_argument("selection threshold must be positive");
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < pt.gamma.size(); ++j) {
        if (pt.gamma[j] > threshold) out.push_back(j);
    }
    return out;
}

double MinMaxProblem::eval_reduced(const std::vector<double>& xr, const std::vector<double>& mu,
                                   double rho, std::vector<double>* grad_out) {
    const double* gamma = xr.data();
    const double* alpha = xr.data() + m_;
    const double nu = xr[m_ + n_];
    const double c2 = cfg_.c2;
    const double w = 1.0 - c2;

    if (!gram_valid_ || gamma_cached_.size() != m_ ||
        std::memcmp(gamma_cached_.data(), gamma, m_ * sizeof(double)) != 0) {
        gamma_cached_.assign(gamma, gamma + m_);
        gram_from_pairs(pairs_, ds_.y, gamma_cached_, gm_);
        gram_valid_ = true;
    }

    for (std::size_t i = 0; i < n_; ++i) {
        galpha_[i] = simd::dot(gm_.G.row(i), alpha, n_);
    }

    // Exact multiplier block: per coordinate, minimize
    //   w a l0 + w (C - a) lC + mu h + rho/2 h^2   with   h = q - l0 + lC
    // over l0, lC >= 0. With z = l0 - lC the optimum is (z+, z-), and z solves
    // a scalar piecewise quadratic in closed form.
    const double inv_rho = 1.0 / rho;
    for (std::size_t i = 0; i < n_; ++i) {
        const double q = galpha_[i] - 1.0 + nu * ds_.y[i];
        const double zp = q - (w * alpha[i] - mu[i]) * inv_rho;
        const double zm = q + (w * (cfg_.C - alpha[i]) + mu[i]) * inv_rho;
        double z = 0.0;
        if (zp > 0.0) {
            z = zp;
        } else if (zm < 0.0) {
            z = zm;
        }
        lam0_[i] = std::max(z, 0.0);
        lamC_[i] = std::max(-z, 0.0);
        h_[i] = q - z;
    }

    const double aga = simd::dot(alpha, galpha_.data(), n_);
    const double ah = simd::dot(alpha, h_.data(), n_);
    const double sa = aga - ah; // s'a with s = G a - h
    const double lc_sum = simd::sum(lamC_.data(), n_);
    const double norm_gamma = norm_p(gamma, m_, cfg_.p);
    last_aga_ = aga;
    last_norm_gamma_ = norm_gamma;
    last_lc_sum_ = lc_sum;

    const double f = c2 * norm_gamma - w * (0.5 * aga - sa - cfg_.C * lc_sum);
    const double phi =
        f + simd::dot(mu.data(), h_.data(), n_) + 0.5 * rho * simd::dot(h_.data(), h_.data(), n_);

    if (grad_out != nullptr) {
        // Envelope theorem: the reduced gradient is the partial gradient of
        // the augmented Lagrangian at the multiplier-block minimizer.
        std::vector<double>& g = *grad_out;
        g.assign(rdim_, 0.0);
        for (std::size_t i = 0; i < n_; ++i) u_[i] = mu[i] + rho * h_[i];
        for (std::size_t i = 0; i < n_; ++i) gu_[i] = simd::dot(gm_.G.row(i), u_.data(), n_);

        for (std::size_t j = 0; j < m_; ++j) g[j] = c2 * norm_p_derivative(gamma[j], cfg_.p);
        {
            // per-pair coefficients, then one contraction per feature lane
            double* ggamma = g.data();
            std::size_t p = 0;
            for (std::size_t i = 0; i < n_; ++i) {
                const double ai = alpha[i];
                const double ui = u_[i];
                const double* Grow = gm_.G.row(i);
                for (std::size_t l = i + 1; l < n_; ++l, ++p) {
                    pairc_[p] = Grow[l] * (w * ai * alpha[l] - ui * alpha[l] - u_[l] * ai);
                }
            }
            if (pairs_.materialized()) {
                const std::size_t np = pairs_.n_pairs();
                for (std::size_t j = 0; j < m_; ++j) {
                    ggamma[j] += simd::dot(pairc_.data(), pairs_.lane(j), np);
                }
            } else {
                p = 0;
                for (std::size_t i = 0; i < n_; ++i) {
                    for (std::size_t l = i + 1; l < n_; ++l, ++p) {
                        if (pairc_[p] != 0.0) {
                            simd::axpy(pairc_[p], pairs_.row(i, l, scratch_row_.data()), ggamma,
                                       m_);
                        }
                    }
                }
            }
        }

        double ya = 0.0;
        double yu = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            ya += ds_.y[i] * alpha[i];
            yu += ds_.y[i] * u_[i];
        }
        double* galpha_grad = g.data() + m_;
        for (std::size_t i = 0; i < n_; ++i) {
            galpha_grad[i] = -w * h_[i] + gu_[i];
        }
        g[m_ + n_] = -w * ya + yu;
    }
    return phi;
}

MinMaxPoint MinMaxProblem::run_outer(const std::vector<double>& xr_start, double seed_fid,
                                     const MinMaxPoint& seed_point, const TraceFn& trace) {
    std::vector<double> x = xr_start;
    for (std::size_t i = 0; i < rdim_; ++i) x[i] = std::clamp(x[i], rlower_[i], rupper_[i]);

    std::vector<double> mu(n_, 0.0);
    double rho = cfg_.penalty_init;

    // Best exactly-feasible point seen, by the identity value
    // c2 ||gamma||_p^p + (1-c2)(aga/2 + C sum lC); seeded from the polished
    // warm start so a feasible warm start is never regressed.
    double best_f = seed_fid;
    MinMaxPoint best_pt = seed_point;
    const auto consider_feasible = [&](const std::vector<double>& xc) {
        // assumes an eval_reduced at xc just populated the scratch fields
        double extra = 0.0;
        for (std::size_t i = 0; i < n_; ++i) extra += std::max(-h_[i], 0.0);
        const double fid = cfg_.c2 * last_norm_gamma_ +
                           (1.0 - cfg_.c2) * (0.5 * last_aga_ + cfg_.C * (last_lc_sum_ + extra));
        if (!trace && fid >= best_f) return;
        MinMaxPoint snap;
        snap.gamma.assign(xc.begin(), xc.begin() + m_);
        snap.alpha.assign(xc.begin() + m_, xc.begin() + m_ + n_);
        snap.nu = xc[m_ + n_];
        snap.lambda0 = lam0_;
        snap.lambdaC = lamC_;
        for (std::size_t i = 0; i < n_; ++i) {
            snap.lambda0[i] += std::max(h_[i], 0.0);
            snap.lambdaC[i] += std::max(-h_[i], 0.0);
        }
        snap.objective = fid;
        snap.eq_residual = 0.0;
        if (trace) trace(snap);
        if (fid < best_f) {
            best_f = fid;
            best_pt = std::move(snap);
        }
    };

    std::vector<double> g(rdim_), g_new(rdim_), d(rdim_), x_trial(rdim_), step(rdim_),
        g_masked(rdim_);
    const auto pg_norm = [&](const std::vector<double>& xc, const std::vector<double>& gc) {
        double nrm = 0.0;
        for (std::size_t i = 0; i < rdim_; ++i) {
            const double moved = std::clamp(xc[i] - gc[i], rlower_[i], rupper_[i]);
            nrm = std::max(nrm, std::abs(xc[i] - moved));
        }
        return nrm;
    };

    double phi = eval_reduced(x, mu, rho, &g);
    if (!std::isfinite(phi)) throw std::runtime_error("non-finite objective at start point");
    consider_feasible(x);

    double eta = 1.0 / std::pow(rho, 0.1); // residual target for multiplier updates
    double best_violation = kInf;          // scaled max of feasibility and stationarity
    int stall_outer = 0;
    bool converged = false;
    bool rho_sufficient = false; // the residual reached eq_tol at this penalty
    int polish_count = 0;
    double prev_h = kInf;
    double last_best_f = kInf; // objective-progress stagnation tracking
    int flat_outer = 0;

    std::vector<double> h0(rdim_, 1.0);
    std::vector<double> w1_(pairs_.n_pairs()), w2_(pairs_.n_pairs()), vj_(n_);
    const double w = 1.0 - cfg_.c2;
    // Curvature memory is kept across outer rounds: a multiplier update
    // shifts the subproblem by O(rho ||h||), which near convergence is far
    // smaller than what the pairs encode. Penalty growth invalidates it.
    LbfgsMemory lbfgs(rdim_);
    for (int outer = 0; outer < cfg_.max_outer; ++outer) {
        const double inner_tol = std::max(cfg_.opt_tol, 1e-2 * std::pow(0.2, outer));
        phi = eval_reduced(x, mu, rho, &g);

        // Diagonal H0 from the known per-block curvature of the subproblem:
        // alpha carries roughly rho * ||G row||^2, nu carries rho * n, and the
        // weight block a Gauss-Newton estimate rho * ||J_gamma_j||^2 built
        // from the constraint Jacobian columns (refreshed once per round).
        for (std::size_t i = 0; i < n_; ++i) {
            const double rnsq = simd::dot(gm_.G.row(i), gm_.G.row(i), n_);
            h0[m_ + i] = 1.0 / std::max(1e-8, rho * rnsq - w);
        }
        h0[m_ + n_] = 1.0 / (rho * static_cast<double>(n_));
        if (pairs_.materialized()) {
            const double* alpha_cur = x.data() + m_;
            std::size_t p = 0;
            for (std::size_t i = 0; i < n_; ++i) {
                const double ai = alpha_cur[i];
                const double* Grow = gm_.G.row(i);
                for (std::size_t l = i + 1; l < n_; ++l, ++p) {
                    w1_[p] = Grow[l] * alpha_cur[l]; // dh_i / dgamma_j weight
                    w2_[p] = Grow[l] * ai;           // dh_l / dgamma_j weight
                }
            }
            for (std::size_t j = 0; j < m_; ++j) {
                const double* lane = pairs_.lane(j);
                std::fill(vj_.begin(), vj_.end(), 0.0);
                p = 0;
                for (std::size_t i = 0; i < n_; ++i) {
                    double acc = vj_[i];
                    for (std::size_t l = i + 1; l < n_; ++l, ++p) {
                        const double dl = lane[p];
                        acc -= dl * w1_[p];
                        vj_[l] -= dl * w2_[p];
                    }
                    vj_[i] = acc;
                }
                const double col_sq = simd::dot(vj_.data(), vj_.data(), n_);
                h0[j] = 1.0 / std::max(1.0, rho * col_sq);
            }
        } else {
            std::fill(h0.begin(), h0.begin() + m_, lbfgs.bb_scale());
        }

        int inner_used = 0;
        for (int it = 0; it < cfg_.max_inner; ++it, ++inner_used) {
            const double pgn = pg_norm(x, g);
            if (pgn <= inner_tol) break;

            // Freeze coordinates pinned (or epsilon-close) to a bound with the
            // gradient pushing outward, take a quasi-Newton step in the rest,
            // project back. The epsilon-active margin keeps near-bound
            // hoverers from polluting the curvature pairs; anything it hides
            // contributes at most eps_active to the projected gradient.
            const double eps_active = std::min(1e-6, pgn);
            for (std::size_t i = 0; i < rdim_; ++i) {
                const bool at_lo = std::isfinite(rlower_[i]) &&
                                   x[i] - rlower_[i] <= eps_active * (1.0 + std::abs(rlower_[i]));
                const bool at_hi = std::isfinite(rupper_[i]) &&
                                   rupper_[i] - x[i] <= eps_active * (1.0 + std::abs(rupper_[i]));
                g_masked[i] = ((at_lo && g[i] > 0.0) || (at_hi && g[i] < 0.0)) ? 0.0 : g[i];
            }

            const auto steepest = [&] {
                lbfgs.clear();
                for (std::size_t i = 0; i < rdim_; ++i) d[i] = -h0[i] * g_masked[i];
            };
            const auto line_search = [&](double t) {
                for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
                    double step_norm = 0.0;
                    for (std::size_t i = 0; i < rdim_; ++i) {
                        x_trial[i] = std::clamp(x[i] + t * d[i], rlower_[i], rupper_[i]);
                        step[i] = x_trial[i] - x[i];
                        step_norm = std::max(step_norm, std::abs(step[i]));
                    }
                    if (step_norm == 0.0) return false;
                    const double phi_trial = eval_reduced(x_trial, mu, rho, nullptr);
                    const double slope = simd::dot(g.data(), step.data(), rdim_);
                    if (std::isfinite(phi_trial) && slope <= 0.0 &&
                        phi_trial <= phi + kArmijo * slope) {
                        return true;
                    }
                }
                return false;
            };
            const auto small_start = [&] {
                double dinf = 0.0;
                for (std::size_t i = 0; i < rdim_; ++i) dinf = std::max(dinf, std::abs(d[i]));
                return std::min(1.0, 1.0 / std::max(1.0, dinf));
            };

            bool fallback = lbfgs.empty();
            lbfgs.direction(g_masked, h0, d);
            for (std::size_t i = 0; i < rdim_; ++i) {
                if (g_masked[i] == 0.0 && g[i] != 0.0) d[i] = 0.0;
            }
            // Angle safeguard: stale curvature pairs after active-set changes
            // can emit near-orthogonal directions.
            const double gd = simd::dot(g.data(), d.data(), rdim_);
            const double dn = std::sqrt(simd::dot(d.data(), d.data(), rdim_));
            const double gn = std::sqrt(simd::dot(g_masked.data(), g_masked.data(), rdim_));
            if (!(gd < -1e-10 * dn * gn)) {
                steepest();
                fallback = true;
            }

            bool accepted = line_search(fallback ? small_start() : 1.0);
            if (!accepted && !fallback) {
                steepest();
                accepted = line_search(small_start());
            }
            if (!accepted) break;

            phi = eval_reduced(x_trial, mu, rho, &g_new); // Gram cache hit from the trial
            consider_feasible(x_trial);
            for (std::size_t i = 0; i < rdim_; ++i) {
                step[i] = x_trial[i] - x[i];
                d[i] = g_new[i] - g[i]; // reuse d as the gradient difference
            }
            lbfgs.push(step, d);
            x.swap(x_trial);
            g.swap(g_new);
        }

        // Stationarity is measured through the augmented-Lagrangian gradient,
        // i.e. with the implicit multiplier estimate mu + rho h; the
        // multiplier block is exactly optimal by construction.
        const double pg_phi = pg_norm(x, g);
        eval_reduced(x, mu, rho, nullptr);
        double h_norm = 0.0;
        for (std::size_t i = 0; i < n_; ++i) h_norm = std::max(h_norm, std::abs(h_[i]));
        if (std::getenv("MMFS_DEBUG")) {
            std::fprintf(stderr, "[outer %2d] rho=%.1e inner=%d pg=%.3e h=%.3e best_f=%.9f\n",
                         outer, rho, inner_used, pg_phi, h_norm, best_f);
        }

        if (h_norm <= cfg_.eq_tol && pg_phi <= cfg_.opt_tol) {
            converged = true;
            break;
        }

        // Outer updates. A feasible round with unmet stationarity is a polish
        // round: multipliers and penalty stay frozen so the next inner round
        // continues the identical minimization (the curvature memory carries
        // over). Infeasible rounds advance the multipliers while the residual
        // tracks eta; otherwise the penalty stiffens. Once the residual has
        // reached eq_tol at the current penalty, that penalty is large
        // enough; growing it further only amplifies the rho*h noise the
        // gradient sees, so growth is latched off from then on.
        bool polish_round = false;
        if (h_norm <= cfg_.eq_tol) {
            rho_sufficient = true;
            polish_round = ++polish_count <= 8;
        } else {
            polish_count = 0;
            // growth is a last resort: as long as multiplier steps keep
            // shrinking the residual geometrically, stay at this penalty
            const bool progressing = h_norm <= 0.5 * prev_h;
            if (rho_sufficient || progressing || h_norm <= eta) {
                for (std::size_t i = 0; i < n_; ++i) mu[i] += rho * h_[i];
                eta = std::max(cfg_.eq_tol, eta / std::pow(rho, 0.9));
            } else {
                rho = std::min(rho * cfg_.penalty_growth, cfg_.rho_cap);
                eta = std::max(cfg_.eq_tol, 1.0 / std::pow(rho, 0.1));
                lbfgs.clear();
            }
        }
        prev_h = h_norm;

        // An outer round counts as stalled only if the subproblem solver gave
        // up early AND the scaled violation stopped improving; an inner loop
        // that exhausts its budget is still making progress.
        const double violation = std::max(h_norm / cfg_.eq_tol, pg_phi / cfg_.opt_tol);
        if (violation > 0.99 * best_violation && inner_used < cfg_.max_inner) {
            if (++stall_outer >= 5) break;
        } else {
            stall_outer = 0;
        }
        best_violation = std::min(best_violation, violation);

        // Flat-objective cutoff: the best feasible value is monotone, so
        // several consecutive outer rounds without measurable improvement end
        // the run with the best iterate (flagged if the tolerances were not
        // met). Heavily penalized and nearly unpenalized instances both have
        // long flat tails where further grinding buys nothing. Productive
        // polish rounds are exempt.
        if (!polish_round && outer >= 2 &&
            best_f > last_best_f - 1e-7 * (1.0 + std::abs(last_best_f))) {
            if (++flat_outer >= 4) break;
        } else {
            flat_outer = 0;
        }
        last_best_f = best_f;
    }

    const auto finalize = [&](const std::vector<double>& xc, bool conv_flag) {
        eval_reduced(xc, mu, rho, &g);
        MinMaxPoint pt;
        pt.gamma.assign(xc.begin(), xc.begin() + m_);
        pt.alpha.assign(xc.begin() + m_, xc.begin() + m_ + n_);
        pt.nu = xc[m_ + n_];
        pt.lambda0 = lam0_;
        pt.lambdaC = lamC_;
        double h_norm = 0.0;
        for (std::size_t i = 0; i < n_; ++i) h_norm = std::max(h_norm, std::abs(h_[i]));
        pt.eq_residual = h_norm;
        pt.kkt_residual = pg_norm(xc, g);
        pt.objective = eval(to_flat(pt), nullptr, 0.0, nullptr);
        pt.converged = conv_flag && h_norm <= cfg_.eq_tol && pt.kkt_residual <= cfg_.opt_tol;
        return pt;
    };

    MinMaxPoint final_pt = finalize(x, converged);
    // Monotone acceptance: never return above the identity value of the
    // (polished) start point, and prefer the best feasible snapshot when the
    // outer loop ends infeasible or regressed.
    const double cmp_tol = 1e-9 * (1.0 + std::abs(seed_fid));
    const bool regressed_vs_start =
        final_pt.eq_residual <= cfg_.eq_tol && final_pt.objective > seed_fid + cmp_tol;
    const bool infeasible_final = final_pt.eq_residual > cfg_.eq_tol;
    const bool best_clearly_better = best_f < final_pt.objective - cmp_tol;
    if (infeasible_final || regressed_vs_start || (!final_pt.converged && best_clearly_better)) {
        MinMaxPoint best_out = best_pt;
        best_out.objective = eval(to_flat(best_out), nullptr, 0.0, nullptr);
        double h_norm = 0.0;
        for (std::size_t i = 0; i < n_; ++i) h_norm = std::max(h_norm, std::abs(h_[i]));
        best_out.eq_residual = h_norm;
        // honest stationarity measure at the snapshot, multipliers included
        std::vector<double> g_full;
        eval(to_flat(best_out), &mu, rho, &g_full);
        double kkt = 0.0;
        const auto xf = to_flat(best_out);
        for (std::size_t i = 0; i < dim_; ++i) {
            const double moved = std::clamp(xf[i] - g_full[i], lower_[i], upper_[i]);
            kkt = std::max(kkt, std::abs(xf[i] - moved));
        }
        best_out.kkt_residual = kkt;
        best_out.converged =
            best_out.eq_residual <= cfg_.eq_tol && best_out.kkt_residual <= cfg_.opt_tol;
        if (best_out.objective <= final_pt.objective || infeasible_final) {
            return best_out;
        }
    }
    return final_pt;
}

MinMaxPoint MinMaxProblem::solve(const MinMaxPoint& warm, const TraceFn& trace) {
    if (warm.gamma.size() != m_ || warm.alpha.size() != n_ || warm.lambda0.size() != n_ ||
        warm.lambdaC.size() != n_) {
        throw std::invalid_argument("solve: warm start dimensions do not match the dataset");
    }
    if (cfg_.freeze_gamma) {
        for (std::size_t j = 0; j < m_; ++j) {
            lower_[j] = warm.gamma[j];
            upper_[j] = warm.gamma[j];
            rlower_[j] = warm.gamma[j];
            rupper_[j] = warm.gamma[j];
        }
    }

    // Identity value and polished snapshot of the warm start: the monotone
    // anchor for both runs.
    const double f_warm = eval(to_flat(warm), nullptr, 0.0, nullptr);
    if (!std::isfinite(f_warm)) throw std::runtime_error("non-finite objective at warm start");
    const auto seed_from = [&](const MinMaxPoint& pt) {
        eval(to_flat(pt), nullptr, 0.0, nullptr);
        double extra = 0.0;
        for (std::size_t i = 0; i < n_; ++i) extra += std::max(-h_[i], 0.0);
        const double fid = cfg_.c2 * last_norm_gamma_ +
                           (1.0 - cfg_.c2) * (0.5 * last_aga_ + cfg_.C * (last_lc_sum_ + extra));
        MinMaxPoint polished = feasibility_polish(pt, h_);
        polished.objective = fid;
        return std::make_pair(fid, polished);
    };
    const auto reduce = [&](const MinMaxPoint& pt) {
        std::vector<double> xr(rdim_);
        std::copy(pt.gamma.begin(), pt.gamma.end(), xr.begin());
        std::copy(pt.alpha.begin(), pt.alpha.end(), xr.begin() + m_);
        xr[m_ + n_] = pt.nu;
        return xr;
    };

    const auto [fid, seed_pt] = seed_from(warm);
    MinMaxPoint first = run_outer(reduce(warm), fid, seed_pt, trace);
    // A run that improved the objective and ended feasible is accepted even
    // when flagged; the restart is reserved for genuine stalls.
    const bool stalled = first.eq_residual > cfg_.eq_tol ||
                         first.objective > fid - 1e-7 * (1.0 + std::abs(fid));
    if (first.converged || !stalled) return first;

    // One deterministic restart from a shrunk weight vector; the equality
    // residual this introduces is handled by the outer loop.
    MinMaxPoint perturbed = warm;
    for (auto& gj : perturbed.gamma) gj *= 0.5;
    const auto [fid2, seed_pt2] = seed_from(perturbed);
    MinMaxPoint second = run_outer(reduce(perturbed), fid2, seed_pt2, trace);

    const bool first_feas = first.eq_residual <= cfg_.eq_tol;
    const bool second_feas = second.eq_residual <= cfg_.eq_tol;
    if (first_feas != second_feas) return first_feas ? first : second;
    if (first_feas) {
        const double tol = 1e-9 * (1.0 + std::abs(first.objective));
        if (second.objective < first.objective - tol) return second;
        if (first.objective < second.objective - tol) return first;
        return second.converged && !first.converged ? second : first;
    }
    return first.eq_residual <= second.eq_residual ? first : second;
}

MinMaxPoint solve_lower_level_dual(const Dataset& ds, const KernelParams& params, double C,
                                   const MinMaxConfig& base) {
    MinMaxConfig cfg = base;
    cfg.c2 = 0.0;
    cfg.C = C;
    cfg.freeze_gamma = true;
    MinMaxProblem problem(ds, cfg);

    MinMaxPoint start;
    start.gamma = params.gamma;
    start.alpha.assign(ds.n_rows(), 0.0);
    start.nu = 0.0;
    start.lambda0.assign(ds.n_rows(), 0.0);
    start.lambdaC.assign(ds.n_rows(), 1.0); // feasible: G*0 = e - 0 y + 0 - e ... holds with lC = e
    return problem.solve(start);
}

std::string MinMaxPoint::to_json() const {
    nlohmann::json j;
    j["gamma"] = gamma;
    j["alpha"] = alpha;
    j["nu"] = nu;
    j["lambda0"] = lambda0;
    j["lambdaC"] = lambdaC;
    j["objective"] = objective;
    j["eq_residual"] = eq_residual;
    j["kkt_residual"] = kkt_residual;
    j["converged"] = converged;
    return j.dump();
}

MinMaxPoint MinMaxPoint::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    MinMaxPoint pt;
    pt.gamma = j.at("gamma").get<std::vector<double>>();
    pt.alpha = j.at("alpha").get<std::vector<double>>();
    pt.nu = j.at("nu").get<double>();
    pt.lambda0 = j.at("lambda0").get<std::vector<double>>();
    pt.lambdaC = j.at("lambdaC").get<std::vector<double>>();
    pt.objective = j.at("objective").get<double>();
    pt.eq_residual = j.at("eq_residual").get<double>();
    pt.kkt_residual = j.at("kkt_residual").get<double>();
    pt.converged = j.at("converged").get<bool>();
    return pt;
}

} // namespace mmfs
