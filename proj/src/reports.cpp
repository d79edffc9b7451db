// SPDX-License-Identifier: Apache-2.0

#include "mmfs/reports.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace mmfs {

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

} // namespace

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for hashing: " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char chunk[65536];
    while (in.read(chunk, sizeof(chunk)) || in.gcount() > 0) {
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(chunk[i]);
            h *= 0x100000001b3ULL;
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_frontier_csv(const FrontierReport& report, double threshold, const std::string& path) {
    auto out = open_out(path);
    out << "C2,fold,C_star,gamma_init,norm_gamma,n_selected,acc_test\n";
    for (std::size_t ci = 0; ci < report.c2_grid.size(); ++ci) {
        for (const auto& fr : report.results[ci]) {
            double norm = 0.0;
            for (const double g : fr.point.gamma) norm += g;
            out << format_double(report.c2_grid[ci]) << ',' << fr.fold << ','
                << format_double(fr.C_star) << ',' << format_double(fr.gamma_init) << ','
                << format_double(norm) << ',' << selected_features(fr.point, threshold).size()
                << ',' << format_double(fr.accuracy) << '\n';
        }
    }
}

void write_ranking_csv(const RankingTable& table, const std::vector<std::string>& feature_names,
                       const std::string& path) {
    auto out = open_out(path);
    out << "C2,rank,feature_name,mean_gamma\n";
    for (std::size_t ci = 0; ci < table.c2_grid.size(); ++ci) {
        const auto& order = table.order[ci];
        for (std::size_t pos = 0; pos < order.size(); ++pos) {
            const int j = order[pos];
            out << format_double(table.c2_grid[ci]) << ',' << (pos + 1) << ','
                << feature_names[j] << ',' << format_double(table.mean_gamma[ci][j]) << '\n';
        }
    }
}

void write_correlation_csv(const Matrix& corr, const std::vector<std::string>& feature_names,
                           const std::string& path) {
    auto out = open_out(path);
    out << "feature";
    for (const auto& name : feature_names) out << ',' << name;
    out << '\n';
    for (std::size_t i = 0; i < corr.rows(); ++i) {
        out << feature_names[i];
        for (std::size_t j = 0; j < corr.cols(); ++j) out << ',' << format_double(corr(i, j));
        out << '\n';
    }
}

void write_comparison_csv(
    const std::vector<std::pair<std::string, std::vector<ComparatorRow>>>& methods,
    const std::string& path) {
    auto out = open_out(path);
    out << "method,fold,accuracy,n_selected\n";
    for (const auto& [name, rows] : methods) {
        for (const auto& row : rows) {
            out << name << ',' << row.fold << ',' << format_double(row.accuracy) << ','
                << row.n_selected << '\n';
        }
    }
}

void write_summary_csv(const std::vector<FoldResult>& folds, double threshold,
                       const std::string& path) {
    auto out = open_out(path);
    out << "fold,C_star,gamma_init,norm_gamma,n_selected,acc_test,converged\n";
    for (const auto& fr : folds) {
        double norm = 0.0;
        for (const double g : fr.point.gamma) norm += g;
        out << fr.fold << ',' << format_double(fr.C_star) << ',' << format_double(fr.gamma_init)
            << ',' << format_double(norm) << ',' << selected_features(fr.point, threshold).size()
            << ',' << format_double(fr.accuracy) << ',' << (fr.flagged ? 0 : 1) << '\n';
    }
}

void write_manifest(const ManifestInfo& info, const std::string& path) {
    nlohmann::json j;
    j["version"] = kVersion;
    j["command"] = info.command;
    j["dataset"] = {{"path", info.dataset_path},
                    {"hash_fnv1a64", info.dataset_hash},
                    {"n_rows", info.n_rows},
                    {"n_features", info.n_features}};
    j["seed"] = info.seed;
    j["outer_k"] = info.outer_k;
    j["inner_k"] = info.settings.inner_k;
    j["jobs"] = info.jobs;
    j["grid"] = {{"C", info.grid.C_values},
                 {"gamma", info.grid.gamma_values},
                 {"C2", info.c2_used}};
    j["tolerances"] = {{"grid_smo_tol", info.settings.grid_smo.tol},
                       {"grid_smo_max_updates", info.settings.grid_smo.max_updates},
                       {"exact_smo_tol", info.settings.exact_smo.tol},
                       {"exact_smo_max_updates", info.settings.exact_smo.max_updates},
                       {"nlp_eq_tol", info.settings.nlp.eq_tol},
                       {"nlp_opt_tol", info.settings.nlp.opt_tol},
                       {"nlp_max_outer", info.settings.nlp.max_outer},
                       {"nlp_max_inner", info.settings.nlp.max_inner},
                       {"nlp_penalty_init", info.settings.nlp.penalty_init},
                       {"nlp_penalty_growth", info.settings.nlp.penalty_growth},
                       {"norm_p", info.settings.nlp.p},
                       {"threshold", info.settings.threshold},
                       {"l1_max_iter_cv", info.settings.l1_max_iter_cv},
                       {"l1_max_iter_final", info.settings.l1_max_iter_final}};
    j["flags"] = {{"paper_scaling", info.settings.paper_scaling},
                  {"solve_eq17", info.settings.solve_eq17},
                  {"pair_cache", info.settings.pair_cache}};
    j["outputs"] = info.outputs;
    j["non_converged"] = info.flagged;

    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

} // namespace mmfs
