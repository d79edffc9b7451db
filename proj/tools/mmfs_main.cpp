// SPDX-License-Identifier: Apache-2.0
//
// mmfs: embedded feature selection for nonlinear SVM classification.
// Subcommands: fit, frontier, rank, compare, synth. Exit codes: 0 success,
// 1 input/configuration error, 2 completed with flagged non-convergence.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "mmfs/comparators.hpp"
#include "mmfs/dataset.hpp"
#include "mmfs/parallel.hpp"
#include "mmfs/pipeline.hpp"
#include "mmfs/reports.hpp"
#include "mmfs/rng.hpp"

namespace {

namespace fs = std::filesystem;
using namespace mmfs;

struct CliOptions {
    std::string data;
    std::string label_col = "label";
    std::uint64_t seed = 0;
    int outer_k = 10;
    int inner_k = 5;
    double c2 = 0.5;
    std::string c2_grid;
    std::string c_grid;
    std::string gamma_grid;
    int jobs = 1;
    std::string out = "mmfs_out";
    bool paper_scaling = false;
    bool solve_eq17 = false;
    bool no_pair_cache = false;
    double threshold = 0.01;
    double eq_tol = 1e-5;
    double opt_tol = 1e-5;
    int max_outer = 50;
    int max_inner = 500;
    double norm_p = 1.0;
    double svm_tol = 1e-8;
    double grid_tol = 1e-6;
};

std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stod(item));
    }
    return out;
}

void add_common(CLI::App* cmd, CliOptions& opt, bool needs_c2, bool needs_c2_grid) {
    cmd->add_option("--data", opt.data, "Dataset CSV (header row, one label column)")->required();
    cmd->add_option("--label-col", opt.label_col, "Label column name");
    cmd->add_option("--seed", opt.seed, "Root seed; all randomness derives from it");
    cmd->add_option("--outer-k", opt.outer_k, "Outer fold count");
    cmd->add_option("--inner-k", opt.inner_k, "Inner CV fold count for the grid search");
    if (needs_c2) cmd->add_option("--c2", opt.c2, "Complexity/accuracy trade-off in [0,1]");
    if (needs_c2_grid) cmd->add_option("--c2-grid", opt.c2_grid, "Comma list of C2 values");
    cmd->add_option("--c-grid", opt.c_grid, "Comma list of C values");
    cmd->add_option("--gamma-grid", opt.gamma_grid, "Comma list of isotropic gamma values");
    cmd->add_option("--jobs", opt.jobs, "Worker threads (1 = serial reference)");
    cmd->add_option("--out", opt.out, "Output directory");
    cmd->add_flag("--paper-scaling", opt.paper_scaling,
                  "Fit the [-1,1] scaling on the full sample before splitting");
    cmd->add_flag("--solve-eq17", opt.solve_eq17,
                  "Obtain initial multipliers from the explicit lower-level dual solve");
    cmd->add_flag("--no-pair-cache", opt.no_pair_cache,
                  "Recompute pair differences on the fly (high-dimensional data)");
    cmd->add_option("--threshold", opt.threshold, "Relevance threshold on gamma_j");
    cmd->add_option("--eq-tol", opt.eq_tol, "NLP equality tolerance");
    cmd->add_option("--opt-tol", opt.opt_tol, "NLP stationarity tolerance");
    cmd->add_option("--max-outer", opt.max_outer, "NLP outer iteration cap");
    cmd->add_option("--max-inner", opt.max_inner, "NLP inner iteration cap");
    cmd->add_option("--norm-p", opt.norm_p, "Norm exponent p");
    cmd->add_option("--svm-tol", opt.svm_tol, "KKT tolerance of warm-start/refit SVM solves");
    cmd->add_option("--grid-tol", opt.grid_tol, "KKT tolerance of grid-search SVM solves");
    cmd->set_config("--config", "", "Flat key=value config file; flags override");
}

SolverSettings make_settings(const CliOptions& opt) {
    SolverSettings s;
    s.grid_smo.tol = opt.grid_tol;
    s.exact_smo.tol = opt.svm_tol;
    s.nlp.eq_tol = opt.eq_tol;
    s.nlp.opt_tol = opt.opt_tol;
    s.nlp.max_outer = opt.max_outer;
    s.nlp.max_inner = opt.max_inner;
    s.nlp.p = opt.norm_p;
    s.threshold = opt.threshold;
    s.inner_k = opt.inner_k;
    s.seed = opt.seed;
    s.paper_scaling = opt.paper_scaling;
    s.solve_eq17 = opt.solve_eq17;
    s.pair_cache = !opt.no_pair_cache;
    return s;
}

GridSpec make_grid(const CliOptions& opt, bool use_single_c2) {
    GridSpec grid = GridSpec::defaults();
    if (!opt.c_grid.empty()) grid.C_values = parse_grid(opt.c_grid);
    if (!opt.gamma_grid.empty()) grid.gamma_values = parse_grid(opt.gamma_grid);
    if (use_single_c2) {
        grid.C2_values = {opt.c2};
    } else if (!opt.c2_grid.empty()) {
        grid.C2_values = parse_grid(opt.c2_grid);
    }
    grid.validate();
    return grid;
}

ManifestInfo base_manifest(const std::string& command, const CliOptions& opt, const Dataset& ds,
                           const GridSpec& grid, const SolverSettings& settings) {
    ManifestInfo info;
    info.command = command;
    info.dataset_path = opt.data;
    info.dataset_hash = hash_file(opt.data);
    info.n_rows = ds.n_rows();
    info.n_features = ds.n_features();
    info.seed = opt.seed;
    info.outer_k = opt.outer_k;
    info.jobs = opt.jobs;
    info.grid = grid;
    info.settings = settings;
    info.c2_used = grid.C2_values;
    return info;
}

void collect_flagged(const FrontierReport& report, ManifestInfo& info) {
    for (std::size_t ci = 0; ci < report.c2_grid.size(); ++ci) {
        for (const auto& fr : report.results[ci]) {
            if (fr.flagged) {
                info.flagged.push_back("c2=" + format_double(report.c2_grid[ci]) +
                                       ",fold=" + std::to_string(fr.fold));
            }
        }
    }
}

int cmd_fit(const CliOptions& opt) {
    const Dataset ds = load_csv(opt.data, opt.label_col);
    const GridSpec grid = make_grid(opt, true);
    const SolverSettings settings = make_settings(opt);
    fs::create_directories(opt.out);

    const FoldPlan plan = make_folds(ds.y, opt.outer_k, opt.seed);
    std::vector<FoldContext> contexts(plan.k);
    parallel_for(opt.jobs, plan.k, [&](std::size_t f) {
        contexts[f] = prepare_fold(ds, plan, static_cast<int>(f), grid, settings);
    });
    std::vector<FoldResult> results(plan.k);
    parallel_for(opt.jobs, plan.k, [&](std::size_t f) {
        results[f] = run_fold_nlp(contexts[f], opt.c2, settings);
    });

    ManifestInfo info = base_manifest("fit", opt, ds, grid, settings);
    bool flagged = false;
    for (const auto& fr : results) {
        if (fr.flagged) {
            flagged = true;
            info.flagged.push_back("c2=" + format_double(opt.c2) +
                                   ",fold=" + std::to_string(fr.fold));
        }
    }

    const std::string summary_path = (fs::path(opt.out) / "summary.csv").string();
    write_summary_csv(results, settings.threshold, summary_path);
    info.outputs.push_back(summary_path);
    for (const auto& fr : results) {
        char name[32];
        std::snprintf(name, sizeof(name), "fold_%03d.json", fr.fold);
        const std::string path = (fs::path(opt.out) / name).string();
        std::ofstream out(path);
        out << fr.to_json() << '\n';
        info.outputs.push_back(path);
    }
    {
        std::ofstream plan_out((fs::path(opt.out) / "folds.json").string());
        plan_out << plan.to_json() << '\n';
    }
    write_manifest(info, (fs::path(opt.out) / "manifest.json").string());
    return flagged ? 2 : 0;
}

int cmd_frontier(const CliOptions& opt, bool emit_frontier_csv) {
    const Dataset ds = load_csv(opt.data, opt.label_col);
    const GridSpec grid = make_grid(opt, false);
    const SolverSettings settings = make_settings(opt);
    fs::create_directories(opt.out);

    const FoldPlan plan = make_folds(ds.y, opt.outer_k, opt.seed);
    const FrontierReport report = frontier(ds, plan, grid, settings, opt.jobs);

    ManifestInfo info = base_manifest(emit_frontier_csv ? "frontier" : "rank", opt, ds, grid, settings);
    collect_flagged(report, info);

    if (emit_frontier_csv) {
        const std::string path = (fs::path(opt.out) / "frontier.csv").string();
        write_frontier_csv(report, settings.threshold, path);
        info.outputs.push_back(path);
    }
    {
        const std::string path = (fs::path(opt.out) / "ranking.csv").string();
        write_ranking_csv(rank_stability(report), ds.feature_names, path);
        info.outputs.push_back(path);
    }
    {
        const std::string path = (fs::path(opt.out) / "correlation.csv").string();
        write_correlation_csv(correlation_matrix(ds), ds.feature_names, path);
        info.outputs.push_back(path);
    }
    write_manifest(info, (fs::path(opt.out) / "manifest.json").string());
    return info.flagged.empty() ? 0 : 2;
}

int cmd_compare(const CliOptions& opt) {
    const Dataset ds = load_csv(opt.data, opt.label_col);
    const GridSpec grid = make_grid(opt, true);
    const SolverSettings settings = make_settings(opt);
    fs::create_directories(opt.out);

    const FoldPlan plan = make_folds(ds.y, opt.outer_k, opt.seed);
    std::vector<FoldContext> contexts(plan.k);
    parallel_for(opt.jobs, plan.k, [&](std::size_t f) {
        contexts[f] = prepare_fold(ds, plan, static_cast<int>(f), grid, settings);
    });

    std::vector<ComparatorRow> mm_rows(plan.k);
    parallel_for(opt.jobs, plan.k, [&](std::size_t f) {
        const FoldResult fr = run_fold_nlp(contexts[f], opt.c2, settings);
        ComparatorRow row;
        row.fold = fr.fold;
        row.accuracy = fr.accuracy;
        row.n_selected = static_cast<int>(selected_features(fr.point, settings.threshold).size());
        row.C_star = fr.C_star;
        row.gamma_star = fr.gamma_init;
        row.flagged = fr.flagged;
        mm_rows[f] = row;
    });

    // NO-FS reuses the grid search already done per fold.
    std::vector<ComparatorRow> nofs_rows(plan.k);
    for (int f = 0; f < plan.k; ++f) {
        const auto& ctx = contexts[f];
        ComparatorRow row;
        row.fold = f;
        row.C_star = ctx.init.C_star;
        row.gamma_star = ctx.init.gamma_init;
        const KernelParams iso = KernelParams::isotropic(ctx.trainval.n_features(), ctx.init.gamma_init);
        row.accuracy = evaluate_accuracy(ctx.test, ctx.trainval, ctx.warm_dual, iso);
        row.n_selected = static_cast<int>(ds.n_features());
        row.flagged = !ctx.warm_dual.converged;
        nofs_rows[f] = row;
    }

    const std::vector<ComparatorRow> l1_rows = run_l1_svm(ds, grid, plan, settings, opt.jobs);

    ManifestInfo info = base_manifest("compare", opt, ds, grid, settings);
    info.c2_used = {opt.c2};
    bool flagged = false;
    for (const auto& rows : {mm_rows, nofs_rows, l1_rows}) {
        for (const auto& row : rows) flagged = flagged || row.flagged;
    }

    const std::string path = (fs::path(opt.out) / "comparison.csv").string();
    write_comparison_csv({{"MM-FS", mm_rows}, {"NO-FS", nofs_rows}, {"l1-SVM", l1_rows}}, path);
    info.outputs.push_back(path);
    write_manifest(info, (fs::path(opt.out) / "manifest.json").string());
    return flagged ? 2 : 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Embedded feature selection for nonlinear SVM classification"};
    app.require_subcommand(1);

    CliOptions opt;
    CLI::App* fit = app.add_subcommand("fit", "Run the full solving strategy at one C2");
    add_common(fit, opt, true, false);
    CLI::App* frontier_cmd =
        app.add_subcommand("frontier", "Sweep C2 and emit the accuracy/complexity frontier");
    add_common(frontier_cmd, opt, false, true);
    CLI::App* rank_cmd = app.add_subcommand("rank", "Sweep C2 and emit feature rankings");
    add_common(rank_cmd, opt, false, true);
    CLI::App* compare_cmd =
        app.add_subcommand("compare", "Benchmark MM-FS against NO-FS and l1-SVM at one C2");
    add_common(compare_cmd, opt, true, false);

    CLI::App* synth = app.add_subcommand("synth", "Write a synthetic two-blob dataset CSV");
    int synth_n = 200;
    int synth_informative = 2;
    int synth_noise = 8;
    double synth_separation = 4.0;
    std::uint64_t synth_seed = 0;
    std::string synth_out = "synthetic.csv";
    synth->add_option("--n", synth_n, "Number of points");
    synth->add_option("--informative", synth_informative, "Informative feature count");
    synth->add_option("--noise", synth_noise, "Noise feature count");
    synth->add_option("--separation", synth_separation, "Blob center separation");
    synth->add_option("--seed", synth_seed, "Seed");
    synth->add_option("--out", synth_out, "Output CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (fit->parsed()) return cmd_fit(opt);
        if (frontier_cmd->parsed()) return cmd_frontier(opt, true);
        if (rank_cmd->parsed()) return cmd_frontier(opt, false);
        if (compare_cmd->parsed()) return cmd_compare(opt);
        if (synth->parsed()) {
            const Dataset ds =
                make_synthetic(synth_n, synth_informative, synth_noise, synth_seed, synth_separation);
            write_csv(ds, synth_out, "label");
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
