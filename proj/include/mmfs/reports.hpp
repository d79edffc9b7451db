// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmfs/comparators.hpp"
#include "mmfs/pipeline.hpp"

namespace mmfs {

inline constexpr const char* kVersion = "0.1.0";

/// Shortest decimal form that round-trips the double exactly.
std::string format_double(double v);

/// FNV-1a 64-bit over the raw file bytes, hex-encoded.
std::string hash_file(const std::string& path);

// Column layouts are fixed; identical inputs produce byte-identical files.
void write_frontier_csv(const FrontierReport& report, double threshold, const std::string& path);
void write_ranking_csv(const RankingTable& table, const std::vector<std::string>& feature_names,
                       const std::string& path);
void write_correlation_csv(const Matrix& corr, const std::vector<std::string>& feature_names,
                           const std::string& path);
void write_comparison_csv(const std::vector<std::pair<std::string, std::vector<ComparatorRow>>>& methods,
                          const std::string& path);
void write_summary_csv(const std::vector<FoldResult>& folds, double threshold,
                       const std::string& path);

struct ManifestInfo {
    std::string command;
    std::string dataset_path;
    std::string dataset_hash;
    std::size_t n_rows = 0;
    std::size_t n_features = 0;
    std::uint64_t seed = 0;
    int outer_k = 0;
    int jobs = 1;
    GridSpec grid;
    SolverSettings settings;
    std::vector<double> c2_used;
    std::vector<std::string> outputs;
    std::vector<std::string> flagged; // "(c2, fold)" labels of non-converged runs
};

void write_manifest(const ManifestInfo& info, const std::string& path);

} // namespace mmfs
