// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mmfs/dataset.hpp"
#include "mmfs/matrix.hpp"

namespace mmfs {

/// Per-feature weights of the anisotropic Gaussian kernel
/// k(a, b) = exp(-sum_j gamma_j (a_j - b_j)^2). All components >= 0, finite.
struct KernelParams {
    std::vector<double> gamma;

    /// All components equal to `value`.
    static KernelParams isotropic(std::size_t n_features, double value);
    void validate() const;
};

/// Kernel matrix K and its label-weighted form G = diag(y) K diag(y).
struct GramMatrices {
    Matrix K;
    Matrix G;
};

double kernel_value(std::span<const double> a, std::span<const double> b, const KernelParams& params);

GramMatrices gram(const Dataset& ds, const KernelParams& params);

/// dG/dgamma_j, entrywise -(x_ij - x_lj)^2 * G_il. Symmetric, zero diagonal.
Matrix gram_gamma_gradient(const Dataset& ds, const KernelParams& params, std::size_t j);

/// Isotropic helpers for the grid-search stage: with gamma_j = g for all j the
/// kernel collapses to exp(-g * S_il) where S is the plain squared-distance
/// matrix, so S is computed once per split and reused across the whole grid.
Matrix pairwise_sqdist(const Dataset& ds);
Matrix cross_sqdist(const Dataset& test, const Dataset& train);
GramMatrices gram_isotropic(const Matrix& sqdist, const std::vector<double>& y, double gamma);

/// Squared per-feature differences (x_ij - x_lj)^2 for every pair i < l.
/// Materialized feature-major (one contiguous lane of n_pairs values per
/// feature), so the inner-loop contractions against the pair axis run as long
/// axpy/dot passes. Materializing costs O(n^2 M / 2) memory; high-dimensional
/// runs can opt out and recompute per-pair rows on the fly instead.
class PairDiffs {
public:
    PairDiffs(const Matrix& X, bool materialize);

    std::size_t n_points() const { return n_; }
    std::size_t n_features() const { return m_; }
    std::size_t n_pairs() const { return n_ * (n_ - 1) / 2; }
    bool materialized() const { return !store_.empty(); }

    /// Feature lane j over all pairs (materialized mode only).
    const double* lane(std::size_t j) const { return store_.data() + j * n_pairs(); }

    /// Per-pair row (pairs enumerated i = 0..n-2, l = i+1..n-1). `scratch`
    /// must hold n_features doubles and is always written; use lane() in the
    /// materialized mode instead of iterating rows.
    const double* row(std::size_t i, std::size_t l, double* scratch) const;

private:
    std::size_t n_ = 0;
    std::size_t m_ = 0;
    const Matrix* X_ = nullptr;
    std::vector<double> store_; // [feature][pair]
};

/// Rebuild K and G at the given weights from a PairDiffs store.
void gram_from_pairs(const PairDiffs& pairs, const std::vector<double>& y,
                     const std::vector<double>& gamma, GramMatrices& out);

} // namespace mmfs
