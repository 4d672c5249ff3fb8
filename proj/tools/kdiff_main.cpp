#include "kdiff/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace kdiff;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct CommonFlags {
    std::string config_path;
    std::string data;
    std::string gmm_config;
    std::string label_col;
    bool no_standardize = false;
    std::string density;
    std::string algorithm;
    double eps = 0;
    int k = 0;
    double h = 0;
    int c = 0;
    double core_threshold = 0;
    double tol = 0;
    int max_iter = 0;
    double damping = -1;
    std::uint64_t seed = 0;
    std::string out_dir;
    std::string name;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
    cmd->set_help_flag("--help", "print help");
    cmd->add_option("--config", flags.config_path, "JSON config file; explicit flags win");
    cmd->add_option("--data", flags.data, "CSV dataset path");
    cmd->add_option("--gmm-config", flags.gmm_config, "JSON GmmSpec for synthetic data");
    cmd->add_option("--label-col", flags.label_col, "label column: none|last|<index>|<name>");
    cmd->add_flag("--no-standardize", flags.no_standardize, "skip per-column standardization");
    cmd->add_option("--density", flags.density, "naive|lc|kd-sym|kd-asym|fkd-sym|fkd-asym");
    cmd->add_option("--algorithm", flags.algorithm, "dpc|dbscan");
    cmd->add_option("--eps", flags.eps, "ball radius");
    cmd->add_option("--k", flags.k, "number of nearest neighbors");
    cmd->add_option("--h", flags.h, "Gaussian bandwidth (default 0.5)");
    cmd->add_option("--c", flags.c, "DPC cluster count (default: ground-truth count)");
    cmd->add_option("--core-threshold", flags.core_threshold, "DBSCAN core density threshold");
    cmd->add_option("--tol", flags.tol, "power iteration L1 tolerance");
    cmd->add_option("--max-iter", flags.max_iter, "power iteration cap");
    cmd->add_option("--damping", flags.damping, "uniform-jump mix in [0,1)");
    cmd->add_option("--seed", flags.seed, "seed for grids and subsampling");
    cmd->add_option("--out", flags.out_dir, "output directory for report/CSV files");
    cmd->add_option("--name", flags.name, "dataset name override");
}

RunConfig build_config(const CLI::App* cmd, const CommonFlags& flags) {
    RunConfig cfg;
    if (cmd->count("--config")) cfg = run_config_from_json_text(read_file(flags.config_path));
    if (cmd->count("--data")) cfg.data_path = flags.data;
    if (cmd->count("--gmm-config")) cfg.gmm = gmm_spec_from_json_text(read_file(flags.gmm_config));
    if (cmd->count("--label-col")) cfg.label_column = flags.label_col;
    if (cmd->count("--no-standardize")) cfg.standardize_features = false;
    if (cmd->count("--density")) cfg.density = density_method_from_string(flags.density);
    if (cmd->count("--algorithm")) cfg.algorithm = algorithm_from_string(flags.algorithm);
    if (cmd->count("--eps")) cfg.eps = flags.eps;
    if (cmd->count("--k")) cfg.k = flags.k;
    if (cmd->count("--h")) cfg.h = flags.h;
    if (cmd->count("--c")) cfg.c = flags.c;
    if (cmd->count("--core-threshold")) cfg.core_threshold = flags.core_threshold;
    if (cmd->count("--tol")) cfg.tol = flags.tol;
    if (cmd->count("--max-iter")) cfg.max_iter = flags.max_iter;
    if (cmd->count("--damping")) cfg.damping = flags.damping;
    if (cmd->count("--seed")) cfg.seed = flags.seed;
    if (cmd->count("--out")) cfg.out_dir = flags.out_dir;
    if (cmd->count("--name")) cfg.dataset_name = flags.name;
    return cfg;
}

std::string fscore(double f) {  // percentage with one decimal, Table-1 style
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * f);
    return buf;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

void print_report(const RunResult& result) {
    std::cout << "| dataset | n | algorithm | density | clusters | F_P | F_B |\n";
    std::cout << "|---|---|---|---|---|---|---|\n";
    std::cout << "| " << result.dataset.name << " | " << result.dataset.size() << " | "
              << result.clusters.provenance.algorithm << " | "
              << result.clusters.provenance.density << " | " << result.clusters.num_clusters;
    if (result.report) {
        std::cout << " | " << fscore(result.report->pairwise.f) << " | "
                  << fscore(result.report->bcubed.f) << " |\n";
    } else {
        std::cout << " | - | - |\n";
    }
}

int run_cmd(const CLI::App* cmd, const CommonFlags& flags, const std::string& density_csv) {
    const RunConfig cfg = build_config(cmd, flags);
    const RunResult result = run(cfg);
    print_report(result);
    if (!density_csv.empty()) {
        std::ofstream out(density_csv);
        write_density_csv(out, result.density);
    }
    if (!cfg.out_dir.empty()) {
        std::cout << "report: " << (std::filesystem::path(cfg.out_dir) / "report.json").string()
                  << "\n";
    }
    return 0;
}

int sweep_cmd(const CLI::App* cmd, const CommonFlags& flags, const std::string& param,
              const std::vector<double>& grid) {
    const RunConfig cfg = build_config(cmd, flags);
    const SweepResult result = sweep(cfg, param, grid);
    std::cout << "| " << param << " | F_P | F_B |\n|---|---|---|\n";
    for (const auto& row : result.rows) {
        std::cout << "| " << num(row.value) << " | " << fscore(row.pairwise_f) << " | "
                  << fscore(row.bcubed_f) << " |\n";
    }
    const auto& best = result.rows[result.best_index];
    std::cout << "best: " << param << " = " << num(best.value) << " (F_P "
              << fscore(best.pairwise_f) << ", F_B " << fscore(best.bcubed_f) << ")\n";
    return 0;
}

int bench_cmd(const CLI::App* cmd, const CommonFlags& flags, const std::vector<Index>& sizes) {
    const RunConfig cfg = build_config(cmd, flags);
    const auto rows = bench(cfg, sizes);
    std::cout << "| n | nnz | kd_seconds | fkd_seconds | kd_peak_mb | fkd_peak_mb |\n"
              << "|---|---|---|---|---|---|\n";
    for (const auto& row : rows) {
        std::cout << "| " << row.n << " | " << row.nnz << " | " << row.kd_seconds << " | "
                  << row.fkd_seconds << " | " << row.kd_peak_mb << " | " << row.fkd_peak_mb
                  << " |\n";
    }
    if (rows.size() >= 2) {
        std::vector<double> nnz, fkd;
        for (const auto& row : rows) {
            nnz.push_back(static_cast<double>(row.nnz));
            fkd.push_back(row.fkd_seconds);
        }
        std::cout << "fkd log-log slope vs nnz: " << loglog_slope(nnz, fkd) << "\n";
    } else {
        std::cout << "single size: no fit attempted\n";
    }
    return 0;
}

int gmm_cmd(const std::string& spec_path, const std::string& out_path) {
    const GmmSpec spec = gmm_spec_from_json_text(read_file(spec_path));
    const Dataset ds = sample_gmm(spec);
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out << std::setprecision(17);
    for (Index j = 0; j < ds.dim(); ++j) out << 'f' << j << ',';
    out << "label\n";
    for (Index i = 0; i < ds.size(); ++i) {
        for (Index j = 0; j < ds.dim(); ++j) out << ds.points(i, j) << ',';
        out << (*ds.labels)[i] << '\n';
    }
    std::cout << "wrote " << ds.size() << " points to " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"density-based clustering with kernel diffusion densities"};
    app.require_subcommand(1);
    app.set_help_flag("--help", "print help");  // long-only so --h stays the bandwidth flag

    CommonFlags run_flags, sweep_flags, bench_flags;
    std::string density_csv;
    std::string sweep_param;
    std::vector<double> sweep_grid;
    std::vector<Index> bench_sizes;
    std::string gmm_spec_path, gmm_out = "gmm.csv";

    auto* run_app = app.add_subcommand("run", "one clustering job");
    add_common_flags(run_app, run_flags);
    run_app->add_option("--density-csv", density_csv, "also export the density vector as CSV");

    auto* sweep_app = app.add_subcommand("sweep", "grid-search one parameter");
    add_common_flags(sweep_app, sweep_flags);
    sweep_app->add_option("--param", sweep_param, "eps|k|h")->required();
    sweep_app->add_option("--grid", sweep_grid, "grid values (default: declared grids)");

    auto* bench_app = app.add_subcommand("bench", "time KD vs FKD over sample sizes");
    add_common_flags(bench_app, bench_flags);
    bench_app->add_option("--sizes", bench_sizes, "ascending sample sizes")->required();

    auto* gmm_app = app.add_subcommand("gmm", "emit a synthetic mixture dataset as CSV");
    gmm_app->set_help_flag("--help", "print help");
    gmm_app->add_option("--gmm-config", gmm_spec_path, "JSON GmmSpec")->required();
    gmm_app->add_option("--out", gmm_out, "output CSV path");

    try {
        app.parse(argc, argv);
        if (run_app->parsed()) return run_cmd(run_app, run_flags, density_csv);
        if (sweep_app->parsed()) return sweep_cmd(sweep_app, sweep_flags, sweep_param, sweep_grid);
        if (bench_app->parsed()) return bench_cmd(bench_app, bench_flags, bench_sizes);
        if (gmm_app->parsed()) return gmm_cmd(gmm_spec_path, gmm_out);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
