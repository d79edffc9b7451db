// SPDX-License-Identifier: Apache-2.0

#include "mmfs/kernel.hpp"

#include <cmath>
#include <stdexcept>

#include "mmfs/simd.hpp"

namespace mmfs {

KernelParams KernelParams::isotropic(std::size_t n_features, double value) {
    return KernelParams{std::vector<double>(n_features, value)};
}

void KernelParams::validate() const {
    for (const double g : gamma) {
        if (!(g >= 0.0) || !std::isfinite(g)) {
            throw std::invalid_argument("kernel weights must be nonnegative and finite");
        }
    }
}

double kernel_value(std::span<const double> a, std::span<const double> b, const KernelParams& params) {
    if (a.size() != b.size() || a.size() != params.gamma.size()) {
        throw std::invalid_argument("kernel_value: dimension mismatch");
    }
    return std::exp(-simd::weighted_sqdist(params.gamma.data(), a.data(), b.data(), a.size()));
}

GramMatrices gram(const Dataset& ds, const KernelParams& params) {
    if (params.gamma.size() != ds.n_features()) {
        throw std::invalid_argument("gram: weight vector does not match feature count");
    }
    const std::size_t n = ds.n_rows();
    const std::size_t m = ds.n_features();
    GramMatrices out;
    out.K = Matrix(n, n);
    out.G = Matrix(n, n);
    // Upper triangle, mirrored; symmetry holds by construction. Exponents are
    // batched per row for the vector kernels.
    std::vector<double> buf(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.K(i, i) = 1.0;
        out.G(i, i) = 1.0;
        for (std::size_t l = i + 1; l < n; ++l) {
            buf[l] = simd::weighted_sqdist(params.gamma.data(), ds.X.row(i), ds.X.row(l), m);
        }
        simd::exp_neg(buf.data() + i + 1, buf.data() + i + 1, n - i - 1);
        for (std::size_t l = i + 1; l < n; ++l) {
            out.K(i, l) = buf[l];
            out.K(l, i) = buf[l];
            const double g = ds.y[i] * ds.y[l] * buf[l];
            out.G(i, l) = g;
            out.G(l, i) = g;
        }
    }
    return out;
}

Matrix gram_gamma_gradient(const Dataset& ds, const KernelParams& params, std::size_t j) {
    if (j >= ds.n_features()) throw std::out_of_range("gram_gamma_gradient: feature index");
    const GramMatrices gm = gram(ds, params);
    const std::size_t n = ds.n_rows();
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t l = i + 1; l < n; ++l) {
            const double d = ds.X(i, j) - ds.X(l, j);
            const double v = -(d * d) * gm.G(i, l);
            out(i, l) = v;
            out(l, i) = v;
        }
    }
    return out;
}

Matrix pairwise_sqdist(const Dataset& ds) {
    const std::size_t n = ds.n_rows();
    const std::size_t m = ds.n_features();
    const std::vector<double> ones(m, 1.0);
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t l = i + 1; l < n; ++l) {
            const double s = simd::weighted_sqdist(ones.data(), ds.X.row(i), ds.X.row(l), m);
            out(i, l) = s;
            out(l, i) = s;
        }
    }
    return out;
}

Matrix cross_sqdist(const Dataset& test, const Dataset& train) {
    if (test.n_features() != train.n_features()) {
        throw std::invalid_argument("cross_sqdist: feature count mismatch");
    }
    const std::size_t m = test.n_features();
    const std::vector<double> ones(m, 1.0);
    Matrix out(test.n_rows(), train.n_rows());
    for (std::size_t i = 0; i < test.n_rows(); ++i) {
        for (std::size_t l = 0; l < train.n_rows(); ++l) {
            out(i, l) = simd::weighted_sqdist(ones.data(), test.X.row(i), train.X.row(l), m);
        }
    }
    return out;
}

GramMatrices gram_isotropic(const Matrix& sqdist, const std::vector<double>& y, double gamma) {
    const std::size_t n = sqdist.rows();
    GramMatrices out;
    out.K = Matrix(n, n);
    out.G = Matrix(n, n);
    std::vector<double> buf(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.K(i, i) = 1.0;
        out.G(i, i) = 1.0;
        simd::scale(gamma, sqdist.row(i) + i + 1, buf.data() + i + 1, n - i - 1);
        simd::exp_neg(buf.data() + i + 1, buf.data() + i + 1, n - i - 1);
        for (std::size_t l = i + 1; l < n; ++l) {
            out.K(i, l) = buf[l];
            out.K(l, i) = buf[l];
            const double g = y[i] * y[l] * buf[l];
            out.G(i, l) = g;
            out.G(l, i) = g;
        }
    }
    return out;
}

PairDiffs::PairDiffs(const Matrix& X, bool materialize) : n_(X.rows()), m_(X.cols()), X_(&X) {
    if (!materialize) return;
    const std::size_t np = n_pairs();
    store_.resize(np * m_);
    std::size_t p = 0;
    for (std::size_t i = 0; i < n_; ++i) {
        const double* xi = X.row(i);
        for (std::size_t l = i + 1; l < n_; ++l, ++p) {
            const double* xl = X.row(l);
            for (std::size_t j = 0; j < m_; ++j) {
                const double d = xi[j] - xl[j];
                store_[j * np + p] = d * d;
            }
        }
    }
}

const double* PairDiffs::row(std::size_t i, std::size_t l, double* scratch) const {
    const double* xi = X_->row(i);
    const double* xl = X_->row(l);
    for (std::size_t j = 0; j < m_; ++j) {
        const double d = xi[j] - xl[j];
        scratch[j] = d * d;
    }
    return scratch;
}

void gram_from_pairs(const PairDiffs& pairs, const std::vector<double>& y,
                     const std::vector<double>& gamma, GramMatrices& out) {
    const std::size_t n = pairs.n_points();
    const std::size_t m = pairs.n_features();
    const std::size_t np = pairs.n_pairs();
    if (out.K.rows() != n) {
        out.K = Matrix(n, n);
        out.G = Matrix(n, n);
    }
    std::vector<double> expd(np);
    if (pairs.materialized()) {
        // weighted distances as one axpy per feature lane over the pair axis
        std::fill(expd.begin(), expd.end(), 0.0);
        for (std::size_t j = 0; j < m; ++j) {
            if (gamma[j] != 0.0) simd::axpy(gamma[j], pairs.lane(j), expd.data(), np);
        }
    } else {
        std::vector<double> scratch(m);
        std::size_t p = 0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t l = i + 1; l < n; ++l, ++p) {
                expd[p] = simd::dot(gamma.data(), pairs.row(i, l, scratch.data()), m);
            }
        }
    }
    simd::exp_neg(expd.data(), expd.data(), np);

    std::size_t p = 0;
    for (std::size_t i = 0; i < n; ++i) {
        out.K(i, i) = 1.0;
        out.G(i, i) = 1.0;
        for (std::size_t l = i + 1; l < n; ++l, ++p) {
            out.K(i, l) = expd[p];
            out.K(l, i) = expd[p];
            const double g = y[i] * y[l] * expd[p];
            out.G(i, l) = g;
            out.G(l, i) = g;
        }
    }
}

} // namespace mmfs
