// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmfs/matrix.hpp"

namespace mmfs {

/// A labelled sample: dense feature matrix, labels in {-1,+1}, and unique
/// feature names. Immutable by convention once built; every operation below
/// returns a new value.
struct Dataset {
    Matrix X;                               // n_rows x n_features
    std::vector<double> y;                  // entries exactly -1 or +1
    std::vector<std::string> feature_names; // length n_features

    std::size_t n_rows() const { return X.rows(); }
    std::size_t n_features() const { return X.cols(); }

    /// Copy of the rows listed in `rows`, order preserved.
    Dataset subset(const std::vector<int>& rows) const;
};

/// Per-feature observed min/max used by the [-1,1] affine rescaling.
struct ScalingSpec {
    std::vector<double> lo;
    std::vector<double> hi;
};

/// Disjoint k-fold assignment of row indices, stratified by label.
struct FoldPlan {
    int k = 0;
    std::vector<int> assignments; // fold index in [0,k) per row
    std::uint64_t seed = 0;

    std::vector<int> test_indices(int fold) const;
    std::vector<int> train_indices(int fold) const;

    std::string to_json() const;
};

/// Parse a comma-separated file with one header row. The `label_column` must
/// hold exactly two distinct raw values; the lexicographically larger one maps
/// to +1. Feature column order is preserved.
Dataset load_csv(const std::string& path, const std::string& label_column);

/// Inverse of load_csv up to float round-trip; labels written as -1/1.
void write_csv(const Dataset& ds, const std::string& path, const std::string& label_column = "label");

/// Observed per-feature ranges.
ScalingSpec fit_scaling(const Dataset& ds);

/// x -> 2(x - lo)/(hi - lo) - 1 per feature; constant features (hi == lo) map
/// to 0. The map is affine and total: values outside the fitted range land
/// outside [-1,1] and are not clipped.
Dataset apply_scaling(const Dataset& ds, const ScalingSpec& spec);

/// Stratified k-fold split: per class, a seeded shuffle dealt round-robin, so
/// per-class fold sizes differ by at most one. Deterministic in (y, k, seed).
FoldPlan make_folds(const std::vector<double>& y, int k, std::uint64_t seed);

/// Two unit-variance Gaussian blobs with centers `separation` apart along each
/// of the first `informative` coordinates; `noise` further coordinates are
/// standard normal and carry no label information. Labels balanced within one.
/// The default separation leaves genuine class overlap so hyperparameter and
/// feature selection stay nontrivial.
Dataset make_synthetic(int n, int informative, int noise, std::uint64_t seed,
                       double separation = 2.0);

} // namespace mmfs
