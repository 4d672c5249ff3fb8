#pragma once

#include "kdiff/clustering.hpp"
#include "kdiff/common.hpp"
#include "kdiff/dataset.hpp"
#include "kdiff/metrics.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace kdiff {

enum class DensityMethod { Naive, Lc, KdSym, KdAsym, FkdSym, FkdAsym };
enum class Algorithm { Dpc, Dbscan };

std::string to_string(DensityMethod m);
std::string to_string(Algorithm a);
DensityMethod density_method_from_string(const std::string& s);
Algorithm algorithm_from_string(const std::string& s);

/// One clustering job: dataset source, density method, algorithm and the
/// hyper-parameters they require. `validate()` names the missing field.
struct RunConfig {
    // Dataset source: exactly one of data_path / gmm.
    std::string data_path;
    std::optional<GmmSpec> gmm;
    std::string label_column = "last";
    bool standardize_features = true;
    std::string dataset_name;  // defaults to file stem or "gmm"

    DensityMethod density = DensityMethod::FkdAsym;
    Algorithm algorithm = Algorithm::Dpc;

    std::optional<double> eps;  // ball families, dbscan adjacency
    std::optional<int> k;       // knn families
    double h = 0.5;             // Gaussian bandwidth

    std::optional<int> c;                  // dpc centers; defaults to truth c
    std::optional<double> core_threshold;  // dbscan

    double tol = 1e-10;
    int max_iter = 10000;
    std::optional<double> damping;  // default: 1e-3 for asym kd, else 0

    std::uint64_t seed = 0;

    std::string out_dir;  // empty: write nothing

    void validate() const;  // throws std::invalid_argument naming the field

    /// Effective damping for the chosen density method.
    double effective_damping() const;
};

/// Parses a RunConfig from JSON text; keys mirror the CLI flag names.
RunConfig run_config_from_json_text(const std::string& text);

struct RunResult {
    Dataset dataset;
    ClusterResult clusters;
    std::optional<EvalReport> report;
    DensityVector density;
    std::string report_json;  // full report (config echo, provenance, scores, timing)
};

/// Executes load -> standardize -> graph -> kernel -> density -> cluster ->
/// evaluate. Errors are rethrown with the failing stage named. When
/// config.out_dir is set, writes report.json and labels.csv there.
RunResult run(const RunConfig& config);

struct SweepRow {
    double value;
    double pairwise_f;
    double bcubed_f;
};

struct SweepResult {
    std::string param;  // "eps" | "k" | "h"
    std::vector<SweepRow> rows;
    int best_index = -1;  // argmax pairwise F
};

/// Re-runs the job across a one-parameter grid and scores each point. The
/// grid defaults to default_eps_grid / default_k_grid / default_h_grid when
/// `grid` is empty. Writes sweep.csv when out_dir is set.
SweepResult sweep(const RunConfig& config, const std::string& param, std::vector<double> grid = {});

struct BenchRow {
    Index n = 0;
    std::int64_t nnz = 0;
    double kd_seconds = 0.0;
    double fkd_seconds = 0.0;
    double kd_peak_mb = 0.0;
    double fkd_peak_mb = 0.0;
    int kd_iterations = 0;
};

/// Times KD (power iteration) against FKD (column sums) on seeded subsamples
/// of the configured dataset, one row per size. Sizes must be ascending and
/// not exceed the dataset. Writes bench.csv when out_dir is set. Peak memory
/// is the process high-water delta (approximate, platform-dependent).
std::vector<BenchRow> bench(const RunConfig& config, const std::vector<Index>& sizes);

/// 20 log-spaced values between the 1st and 50th percentile of pairwise
/// distances, estimated on a seeded subsample of at most 1000 points.
std::vector<double> default_eps_grid(const Dataset& ds, std::uint64_t seed);

/// {5, 10, 20, 40, 80} capped at n-1.
std::vector<double> default_k_grid(Index n);

/// {0.1, 0.5, 1.0, 2.0}.
std::vector<double> default_h_grid();

/// Least-squares slope of log(y) against log(x); x and y must be positive.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace kdiff
