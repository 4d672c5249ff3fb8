#include "kdiff/pipeline.hpp"

#include "kdiff/kernels.hpp"

#include <nlohmann/json.hpp>
#include <sys/resource.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace kdiff {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

double peak_rss_mb() {
    rusage usage{};
    getrusage(RUSAGE_SELF, &usage);
    return static_cast<double>(usage.ru_maxrss) / 1024.0;  // ru_maxrss is KiB on Linux
}

template <typename F>
auto stage(const std::string& name, F&& f) {
    try {
        return f();
    } catch (const ConvergenceError& e) {
        throw ConvergenceError("[" + name + "] " + e.what());
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument("[" + name + "] " + e.what());
    } catch (const std::exception& e) {
        throw std::runtime_error("[" + name + "] " + e.what());
    }
}

bool uses_eps_kernel(DensityMethod m) {
    return m == DensityMethod::Naive || m == DensityMethod::Lc || m == DensityMethod::KdSym ||
           m == DensityMethod::FkdSym;
}

bool uses_knn_kernel(DensityMethod m) {
    return m == DensityMethod::Lc || m == DensityMethod::KdAsym || m == DensityMethod::FkdAsym;
}

bool is_diffusion(DensityMethod m) {
    return m == DensityMethod::KdSym || m == DensityMethod::KdAsym ||
           m == DensityMethod::FkdSym || m == DensityMethod::FkdAsym;
}

std::vector<double> pairwise_distance_sample(const Dataset& ds, std::uint64_t seed) {
    const Index n = ds.size();
    std::vector<Index> idx(n);
    std::iota(idx.begin(), idx.end(), Index{0});
    std::mt19937_64 rng(seed ^ 0x5851f42d4c957f2dULL);
    std::shuffle(idx.begin(), idx.end(), rng);
    const Index m = std::min<Index>(n, 1000);

    std::vector<double> dists;
    dists.reserve(static_cast<std::size_t>(m) * (m - 1) / 2);
    for (Index a = 0; a < m; ++a) {
        for (Index b = a + 1; b < m; ++b) {
            dists.push_back(pairwise_distance(ds, idx[a], idx[b]));
        }
    }
    std::sort(dists.begin(), dists.end());
    return dists;
}

// Linear interpolation between order statistics, q in [0, 1].
double percentile(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("percentile of empty sample");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

Dataset subsample(const Dataset& ds, Index m, std::uint64_t seed) {
    const Index n = ds.size();
    if (m > n) {
        throw std::invalid_argument("subsample size " + std::to_string(m) +
                                    " exceeds dataset size " + std::to_string(n));
    }
    std::vector<Index> idx(n);
    std::iota(idx.begin(), idx.end(), Index{0});
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(m);
    std::sort(idx.begin(), idx.end());

    Dataset out;
    out.name = ds.name;
    out.points.resize(m, ds.dim());
    std::vector<int> labels;
    for (Index r = 0; r < m; ++r) {
        out.points.row(r) = ds.points.row(idx[r]);
        if (ds.labels) labels.push_back((*ds.labels)[idx[r]]);
    }
    if (ds.labels) out.labels = std::move(labels);
    return out;
}

nlohmann::json params_json(const std::map<std::string, double>& params) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [key, value] : params) j[key] = value;
    return j;
}

}  // namespace

std::string to_string(DensityMethod m) {
    switch (m) {
        case DensityMethod::Naive: return "naive";
        case DensityMethod::Lc: return "lc";
        case DensityMethod::KdSym: return "kd-sym";
        case DensityMethod::KdAsym: return "kd-asym";
        case DensityMethod::FkdSym: return "fkd-sym";
        case DensityMethod::FkdAsym: return "fkd-asym";
    }
    return "?";
}

std::string to_string(Algorithm a) { return a == Algorithm::Dpc ? "dpc" : "dbscan"; }

DensityMethod density_method_from_string(const std::string& s) {
    if (s == "naive") return DensityMethod::Naive;
    if (s == "lc") return DensityMethod::Lc;
    if (s == "kd-sym") return DensityMethod::KdSym;
    if (s == "kd-asym") return DensityMethod::KdAsym;
    if (s == "fkd-sym") return DensityMethod::FkdSym;
    if (s == "fkd-asym") return DensityMethod::FkdAsym;
    throw std::invalid_argument("unknown density method '" + s +
                                "' (expected naive|lc|kd-sym|kd-asym|fkd-sym|fkd-asym)");
}

Algorithm algorithm_from_string(const std::string& s) {
    if (s == "dpc") return Algorithm::Dpc;
    if (s == "dbscan") return Algorithm::Dbscan;
    throw std::invalid_argument("unknown algorithm '" + s + "' (expected dpc|dbscan)");
}

double RunConfig::effective_damping() const {
    if (damping) return *damping;
    const bool asym_kd = density == DensityMethod::KdAsym;
    return asym_kd ? 1e-3 : 0.0;
}

void RunConfig::validate() const {
    const bool has_file = !data_path.empty();
    const bool has_gmm = gmm.has_value();
    if (has_file == has_gmm) {
        throw std::invalid_argument("config: exactly one of 'data' and 'gmm' must be set");
    }
    if (has_gmm) gmm->validate();

    if (uses_eps_kernel(density) && !eps) {
        throw std::invalid_argument("config: density '" + to_string(density) + "' requires 'eps'");
    }
    if (uses_knn_kernel(density) && !k) {
        throw std::invalid_argument("config: density '" + to_string(density) + "' requires 'k'");
    }
    if (eps && !(*eps > 0.0)) throw std::invalid_argument("config: 'eps' must be positive");
    if (k && *k < 1) throw std::invalid_argument("config: 'k' must be >= 1");
    if (!(h > 0.0)) throw std::invalid_argument("config: 'h' must be positive");
    if (!(tol > 0.0)) throw std::invalid_argument("config: 'tol' must be positive");
    if (max_iter < 1) throw std::invalid_argument("config: 'max_iter' must be >= 1");
    if (damping && (*damping < 0.0 || *damping >= 1.0)) {
        throw std::invalid_argument("config: 'damping' must lie in [0, 1)");
    }

    if (algorithm == Algorithm::Dbscan) {
        if (!core_threshold) {
            throw std::invalid_argument("config: algorithm 'dbscan' requires 'core-threshold'");
        }
        if (!eps) {
            throw std::invalid_argument("config: algorithm 'dbscan' requires 'eps' (adjacency graph)");
        }
    }
    if (c && *c < 1) throw std::invalid_argument("config: 'c' must be >= 1");
}

RunConfig run_config_from_json_text(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    RunConfig cfg;
    if (j.contains("data")) cfg.data_path = j.at("data").get<std::string>();
    if (j.contains("gmm")) cfg.gmm = gmm_spec_from_json_text(j.at("gmm").dump());
    if (j.contains("label-col")) cfg.label_column = j.at("label-col").get<std::string>();
    if (j.contains("standardize")) cfg.standardize_features = j.at("standardize").get<bool>();
    if (j.contains("name")) cfg.dataset_name = j.at("name").get<std::string>();
    if (j.contains("density")) cfg.density = density_method_from_string(j.at("density"));
    if (j.contains("algorithm")) cfg.algorithm = algorithm_from_string(j.at("algorithm"));
    if (j.contains("eps")) cfg.eps = j.at("eps").get<double>();
    if (j.contains("k")) cfg.k = j.at("k").get<int>();
    if (j.contains("h")) cfg.h = j.at("h").get<double>();
    if (j.contains("c")) cfg.c = j.at("c").get<int>();
    if (j.contains("core-threshold")) cfg.core_threshold = j.at("core-threshold").get<double>();
    if (j.contains("tol")) cfg.tol = j.at("tol").get<double>();
    if (j.contains("max-iter")) cfg.max_iter = j.at("max-iter").get<int>();
    if (j.contains("damping")) cfg.damping = j.at("damping").get<double>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("out")) cfg.out_dir = j.at("out").get<std::string>();
    return cfg;
}

namespace {

nlohmann::json config_json(const RunConfig& cfg) {
    nlohmann::json j;
    if (!cfg.data_path.empty()) j["data"] = cfg.data_path;
    if (cfg.gmm) {
        nlohmann::json g;
        g["n"] = cfg.gmm->n;
        g["seed"] = cfg.gmm->seed;
        g["components"] = nlohmann::json::array();
        for (const auto& comp : cfg.gmm->components) {
            std::vector<double> mean(comp.mean.data(), comp.mean.data() + comp.mean.size());
            g["components"].push_back(
                {{"weight", comp.weight}, {"mean", mean}, {"variance", comp.variance}});
        }
        j["gmm"] = g;
    }
    j["label-col"] = cfg.label_column;
    j["standardize"] = cfg.standardize_features;
    j["density"] = to_string(cfg.density);
    j["algorithm"] = to_string(cfg.algorithm);
    if (cfg.eps) j["eps"] = *cfg.eps;
    if (cfg.k) j["k"] = *cfg.k;
    j["h"] = cfg.h;
    if (cfg.c) j["c"] = *cfg.c;
    if (cfg.core_threshold) j["core-threshold"] = *cfg.core_threshold;
    j["tol"] = cfg.tol;
    j["max-iter"] = cfg.max_iter;
    j["damping"] = cfg.effective_damping();
    j["seed"] = cfg.seed;
    return j;
}

struct PipelineArtifacts {
    Dataset dataset;
    DensityVector density;
    ClusterResult clusters;
    std::optional<EvalReport> report;
    double density_seconds = 0.0;
};

Dataset load_source(const RunConfig& cfg) {
    Dataset ds = cfg.gmm ? sample_gmm(*cfg.gmm)
                         : load_dataset(cfg.data_path, LabelColumn::parse(cfg.label_column));
    if (!cfg.dataset_name.empty()) ds.name = cfg.dataset_name;
    return ds;
}

// Graph/kernel/density stages shared by run and sweep.
DensityVector compute_density(const RunConfig& cfg, const Dataset& ds, double* seconds = nullptr) {
    const auto started = Clock::now();
    DensityVector density;
    switch (cfg.density) {
        case DensityMethod::Naive: {
            density = stage("density", [&] { return density_naive(ds, *cfg.eps); });
            break;
        }
        case DensityMethod::Lc: {
            const auto naive = stage("density", [&] { return density_naive(ds, *cfg.eps); });
            const auto knn = stage("graph", [&] { return build_knn_graph(ds, *cfg.k); });
            density = stage("density", [&] { return density_lc(naive, knn); });
            break;
        }
        default: {
            KernelSpec spec;
            spec.h = cfg.h;
            if (uses_eps_kernel(cfg.density)) {
                spec.family = KernelFamily::SymmetricGaussian;
                spec.eps = *cfg.eps;
            } else {
                spec.family = KernelFamily::AsymmetricGaussian;
                spec.k = *cfg.k;
            }
            const auto kernel = stage("kernel", [&] { return kernel_matrix(ds, spec); });
            const auto P = stage("transition", [&] { return build_transition(kernel); });
            const bool fast =
                cfg.density == DensityMethod::FkdSym || cfg.density == DensityMethod::FkdAsym;
            if (fast) {
                density = stage("density", [&] { return density_fkd(P); });
            } else {
                PowerIterationOptions opts;
                opts.tol = cfg.tol;
                opts.max_iter = cfg.max_iter;
                opts.damping = cfg.effective_damping();
                density = stage("density", [&] { return density_kd(P, opts); });
            }
            density.params["h"] = cfg.h;
            if (spec.family == KernelFamily::SymmetricGaussian) density.params["eps"] = spec.eps;
            else density.params["k"] = spec.k;
            break;
        }
    }
    if (seconds) *seconds = seconds_since(started);
    return density;
}

PipelineArtifacts execute(const RunConfig& cfg) {
    PipelineArtifacts art;
    art.dataset = stage("load", [&] { return load_source(cfg); });
    if (cfg.standardize_features) {
        art.dataset = stage("standardize", [&] { return standardize(art.dataset); });
    }

    art.density = compute_density(cfg, art.dataset, &art.density_seconds);

    if (cfg.algorithm == Algorithm::Dpc) {
        int c = 0;
        if (cfg.c) {
            c = *cfg.c;
        } else if (art.dataset.labels) {
            c = art.dataset.num_classes();
        } else {
            throw std::invalid_argument(
                "[cluster] config: 'c' is required when the dataset has no labels");
        }
        const auto state = stage("cluster", [&] { return dpc_state(art.density, art.dataset); });
        art.clusters = stage("cluster", [&] { return dpc_cluster(state, c); });
    } else {
        const auto graph = stage("graph", [&] { return build_eps_graph(art.dataset, *cfg.eps); });
        art.clusters = stage(
            "cluster", [&] { return dbscan_cluster(art.density, graph, *cfg.core_threshold); });
    }

    if (art.dataset.labels) {
        art.report = stage("evaluate", [&] { return evaluate(art.clusters, *art.dataset.labels); });
    }
    return art;
}

}  // namespace

RunResult run(const RunConfig& config) {
    stage("validate", [&] {
        config.validate();
        return 0;
    });
    const auto started = Clock::now();
    auto art = execute(config);
    const double total_seconds = seconds_since(started);

    nlohmann::json report;
    report["config"] = config_json(config);
    report["dataset"] = {{"name", art.dataset.name},
                         {"n", art.dataset.size()},
                         {"d", art.dataset.dim()},
                         {"classes", art.dataset.num_classes()}};
    report["provenance"] = {{"algorithm", art.clusters.provenance.algorithm},
                            {"density", art.clusters.provenance.density},
                            {"params", params_json(art.clusters.provenance.params)}};
    int noise = 0;
    for (int l : art.clusters.labels) noise += l == ClusterResult::kNoise;
    report["clusters"] = {{"num_clusters", art.clusters.num_clusters}, {"noise_points", noise}};
    if (art.report) {
        report["evaluation"] = nlohmann::json::parse(eval_report_json(*art.report));
    }
    report["timing"] = {{"density_seconds", art.density_seconds},
                        {"total_seconds", total_seconds}};

    RunResult result;
    result.dataset = std::move(art.dataset);
    result.clusters = std::move(art.clusters);
    result.report = std::move(art.report);
    result.density = std::move(art.density);
    result.report_json = report.dump(2);

    if (!config.out_dir.empty()) {
        stage("write", [&] {
            std::filesystem::create_directories(config.out_dir);
            std::ofstream rj(std::filesystem::path(config.out_dir) / "report.json");
            rj << result.report_json << '\n';
            std::ofstream lc(std::filesystem::path(config.out_dir) / "labels.csv");
            write_labels_csv(lc, result.clusters);
            return 0;
        });
    }
    return result;
}

std::vector<double> default_eps_grid(const Dataset& ds, std::uint64_t seed) {
    const auto dists = pairwise_distance_sample(ds, seed);
    double lo = percentile(dists, 0.01);
    const double hi = percentile(dists, 0.50);
    if (!(lo > 0.0)) {
        // Duplicate-heavy data: start at the smallest positive distance.
        auto it = std::upper_bound(dists.begin(), dists.end(), 0.0);
        if (it == dists.end() || !(hi > 0.0)) {
            throw std::invalid_argument("default_eps_grid: all sampled pairwise distances are 0");
        }
        lo = *it;
    }
    if (lo >= hi) return {hi};

    std::vector<double> grid;
    constexpr int kPoints = 20;
    for (int t = 0; t < kPoints; ++t) {
        grid.push_back(lo * std::pow(hi / lo, static_cast<double>(t) / (kPoints - 1)));
    }
    return grid;
}

std::vector<double> default_k_grid(Index n) {
    std::vector<double> grid;
    for (int k : {5, 10, 20, 40, 80}) {
        if (k <= n - 1) grid.push_back(k);
    }
    if (grid.empty() && n >= 2) grid.push_back(static_cast<double>(n - 1));
    return grid;
}

std::vector<double> default_h_grid() { return {0.1, 0.5, 1.0, 2.0}; }

SweepResult sweep(const RunConfig& config, const std::string& param, std::vector<double> grid) {
    if (param != "eps" && param != "k" && param != "h") {
        throw std::invalid_argument("sweep: param must be one of eps|k|h (got '" + param + "')");
    }

    // Validate everything except the swept parameter, which the grid supplies.
    RunConfig probe = config;
    probe.out_dir.clear();
    if (param == "eps") probe.eps = probe.eps.value_or(1.0);
    if (param == "k") probe.k = probe.k.value_or(1);
    stage("validate", [&] {
        probe.validate();
        return 0;
    });

    Dataset ds = stage("load", [&] { return load_source(config); });
    if (config.standardize_features) {
        ds = stage("standardize", [&] { return standardize(ds); });
    }
    if (!ds.labels) throw std::invalid_argument("sweep: dataset must have ground-truth labels");

    if (grid.empty()) {
        if (param == "eps") grid = default_eps_grid(ds, config.seed);
        else if (param == "k") grid = default_k_grid(ds.size());
        else grid = default_h_grid();
    }
    if (grid.empty()) throw std::invalid_argument("sweep: empty grid");

    SweepResult result;
    result.param = param;
    for (double value : grid) {
        RunConfig point = probe;
        if (param == "eps") point.eps = value;
        else if (param == "k") point.k = static_cast<int>(std::llround(value));
        else point.h = value;

        PipelineArtifacts art;
        art.density = compute_density(point, ds);
        int c = point.c ? *point.c : ds.num_classes();
        ClusterResult clusters;
        if (point.algorithm == Algorithm::Dpc) {
            const auto state = stage("cluster", [&] { return dpc_state(art.density, ds); });
            clusters = stage("cluster", [&] { return dpc_cluster(state, c); });
        } else {
            const auto graph = stage("graph", [&] { return build_eps_graph(ds, *point.eps); });
            clusters = stage(
                "cluster", [&] { return dbscan_cluster(art.density, graph, *point.core_threshold); });
        }
        const auto report = stage("evaluate", [&] { return evaluate(clusters, *ds.labels); });
        result.rows.push_back({value, report.pairwise.f, report.bcubed.f});
    }

    result.best_index = 0;
    for (std::size_t i = 1; i < result.rows.size(); ++i) {
        if (result.rows[i].pairwise_f > result.rows[result.best_index].pairwise_f) {
            result.best_index = static_cast<int>(i);
        }
    }

    if (!config.out_dir.empty()) {
        std::filesystem::create_directories(config.out_dir);
        std::ofstream out(std::filesystem::path(config.out_dir) / "sweep.csv");
        out << "param,value,pairwise_f,bcubed_f,best\n" << std::setprecision(17);
        for (std::size_t i = 0; i < result.rows.size(); ++i) {
            out << param << ',' << result.rows[i].value << ',' << result.rows[i].pairwise_f << ','
                << result.rows[i].bcubed_f << ',' << (static_cast<int>(i) == result.best_index)
                << '\n';
        }
    }
    return result;
}

std::vector<BenchRow> bench(const RunConfig& config, const std::vector<Index>& sizes) {
    if (sizes.empty()) throw std::invalid_argument("bench: empty size list");
    if (!std::is_sorted(sizes.begin(), sizes.end())) {
        throw std::invalid_argument("bench: sizes must be ascending");
    }
    RunConfig probe = config;
    probe.out_dir.clear();
    stage("validate", [&] {
        probe.validate();
        return 0;
    });
    if (!probe.k) throw std::invalid_argument("bench: 'k' is required (knn kernel keeps nnz linear)");

    Dataset source = stage("load", [&] { return load_source(config); });
    if (config.standardize_features) {
        source = stage("standardize", [&] { return standardize(source); });
    }

    std::vector<BenchRow> rows;
    for (Index size : sizes) {
        const Dataset ds = stage("subsample", [&] { return subsample(source, size, config.seed); });

        KernelSpec spec;
        spec.family = KernelFamily::AsymmetricGaussian;
        spec.k = *probe.k;
        spec.h = probe.h;
        const auto kernel = stage("kernel", [&] { return kernel_matrix(ds, spec); });
        const auto P = stage("transition", [&] { return build_transition(kernel); });

        BenchRow row;
        row.n = size;
        row.nnz = static_cast<std::int64_t>(P.nonzeros());

        PowerIterationOptions opts;
        opts.tol = probe.tol;
        opts.max_iter = probe.max_iter;
        opts.damping = probe.damping.value_or(1e-3);

        const double rss_before_kd = peak_rss_mb();
        const auto kd_started = Clock::now();
        const auto kd = stage("density", [&] { return density_kd(P, opts); });
        row.kd_seconds = seconds_since(kd_started);
        row.kd_peak_mb = std::max(0.0, peak_rss_mb() - rss_before_kd);
        row.kd_iterations = static_cast<int>(kd.params.at("iterations"));

        // The column-sum pass is microseconds-scale; repeat to at least 50 ms
        // of work and report the mean.
        const double rss_before_fkd = peak_rss_mb();
        int reps = 0;
        const auto fkd_started = Clock::now();
        double elapsed = 0.0;
        do {
            volatile double sink = density_fkd(P).values[0];
            (void)sink;
            ++reps;
            elapsed = seconds_since(fkd_started);
        } while (elapsed < 0.05 && reps < 100000);
        row.fkd_seconds = elapsed / reps;
        row.fkd_peak_mb = std::max(0.0, peak_rss_mb() - rss_before_fkd);

        rows.push_back(row);
    }

    if (!config.out_dir.empty()) {
        std::filesystem::create_directories(config.out_dir);
        std::ofstream out(std::filesystem::path(config.out_dir) / "bench.csv");
        out << "n,nnz,kd_seconds,fkd_seconds,kd_peak_mb,fkd_peak_mb,kd_iterations\n"
            << std::setprecision(17);
        for (const auto& row : rows) {
            out << row.n << ',' << row.nnz << ',' << row.kd_seconds << ',' << row.fkd_seconds << ','
                << row.kd_peak_mb << ',' << row.fkd_peak_mb << ',' << row.kd_iterations << '\n';
        }
    }
    return rows;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw std::invalid_argument("loglog_slope: need at least two points");
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) {
            throw std::invalid_argument("loglog_slope: values must be positive");
        }
        const double lx = std::log(x[i]);
        const double ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace kdiff
