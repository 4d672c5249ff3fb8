#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kdiff/clustering.hpp"
#include "kdiff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace kdiff;

namespace {

Dataset collinear_012() {
    Dataset ds;
    ds.points.resize(3, 1);
    ds.points << 0.0, 1.0, 2.0;
    return ds;
}

DensityVector density_of(std::initializer_list<double> values) {
    DensityVector dv;
    dv.kind = DensityKind::Naive;
    dv.values = Vector::Zero(static_cast<Index>(values.size()));
    Index i = 0;
    for (double v : values) dv.values[i++] = v;
    return dv;
}

Dataset two_blobs(Index per_blob, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-0.5, 0.5);
    Dataset ds;
    ds.points.resize(2 * per_blob, 2);
    std::vector<int> labels;
    for (Index i = 0; i < 2 * per_blob; ++i) {
        const int blob = i < per_blob ? 0 : 1;
        ds.points(i, 0) = 50.0 * blob + unif(rng);
        ds.points(i, 1) = unif(rng);
        labels.push_back(blob);
    }
    ds.labels = labels;
    return ds;
}

Dataset random_dataset(Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 4.0);
    Dataset ds;
    ds.points.resize(n, 2);
    for (Index i = 0; i < n; ++i) {
        ds.points(i, 0) = unif(rng);
        ds.points(i, 1) = unif(rng);
    }
    return ds;
}

// Textbook BFS DBSCAN over raw coordinates. Core: |N_eps(p)| >= MinPts, self
// included. Shares the border rule (nearest core, tie lower index) with the
// library implementation; cluster formation is structurally independent
// (queue expansion vs union-find + compaction).
std::vector<int> reference_dbscan(const Dataset& ds, double eps, int min_pts) {
    const Index n = ds.size();
    std::vector<std::vector<Index>> neigh(n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            if (pairwise_distance(ds, i, j) <= eps) neigh[i].push_back(j);
        }
    }
    std::vector<bool> core(n);
    for (Index i = 0; i < n; ++i) core[i] = static_cast<int>(neigh[i].size()) >= min_pts;

    std::vector<int> labels(n, -1);
    int cluster = 0;
    for (Index i = 0; i < n; ++i) {
        if (!core[i] || labels[i] >= 0) continue;
        std::vector<Index> queue = {i};
        labels[i] = cluster;
        while (!queue.empty()) {
            const Index u = queue.back();
            queue.pop_back();
            for (Index v : neigh[u]) {
                if (!core[v] || labels[v] >= 0) continue;
                labels[v] = cluster;
                queue.push_back(v);
            }
        }
        ++cluster;
    }
    for (Index i = 0; i < n; ++i) {
        if (core[i]) continue;
        double best = std::numeric_limits<double>::infinity();
        Index best_core = -1;
        for (Index v : neigh[i]) {
            if (v == i || !core[v]) continue;
            const double dist = pairwise_distance(ds, i, v);
            if (dist < best || (dist == best && v < best_core)) {
                best = dist;
                best_core = v;
            }
        }
        if (best_core >= 0) labels[i] = labels[best_core];
    }
    return labels;
}

std::vector<int> canonical(std::vector<int> labels) {
    std::vector<int> remap(labels.size() + 1, -1);
    int next = 0;
    for (int& l : labels) {
        if (l < 0) continue;
        if (remap[l] < 0) remap[l] = next++;
        l = remap[l];
    }
    return labels;
}

}  // namespace

TEST_CASE("dpc_state: hand trace on collinear points") {
    const auto state = dpc_state(density_of({3.0, 2.0, 1.0}), collinear_012());
    CHECK(state.nn_higher[0] == DpcState::kNoHigher);
    CHECK(state.nn_higher[1] == 0);
    CHECK(state.nn_higher[2] == 1);
    CHECK(state.delta[0] == 2.0);  // max pairwise distance
    CHECK(state.delta[1] == 1.0);
    CHECK(state.delta[2] == 1.0);
    CHECK(state.gamma[0] == 6.0);
}

TEST_CASE("dpc_state: density ties resolved by index") {
    const auto state = dpc_state(density_of({1.0, 1.0, 1.0}), collinear_012());
    CHECK(state.nn_higher[0] == DpcState::kNoHigher);  // point 0 is the unique sentinel
    CHECK(state.nn_higher[1] == 0);
    CHECK(state.nn_higher[2] == 1);
}

TEST_CASE("dpc_state: duplicate coordinates give delta 0 to the lower-density twin") {
    Dataset ds;
    ds.points.resize(3, 1);
    ds.points << 0.0, 0.0, 5.0;
    const auto state = dpc_state(density_of({2.0, 1.0, 0.5}), ds);
    CHECK(state.delta[1] == 0.0);
    CHECK(state.nn_higher[1] == 0);
}

TEST_CASE("dpc_cluster: separated blobs recover the ground truth") {
    const auto ds = two_blobs(40, 3);
    // any density works on well-separated blobs; use a blob-peaked one
    DensityVector dv;
    dv.kind = DensityKind::Fkd;
    dv.values.resize(80);
    for (Index i = 0; i < 80; ++i) dv.values[i] = 1.0 / (1.0 + ds.points(i, 1) * ds.points(i, 1));
    const auto state = dpc_state(dv, ds);
    const auto result = dpc_cluster(state, 2);
    const auto scores = pairwise_scores(result.labels, *ds.labels);
    CHECK(scores.f == 1.0);
}

TEST_CASE("dpc_cluster: degenerate counts") {
    const auto ds = random_dataset(10, 4);
    const auto state = dpc_state(density_of({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}), ds);

    const auto all_one = dpc_cluster(state, 1);
    CHECK(all_one.num_clusters == 1);
    CHECK(std::all_of(all_one.labels.begin(), all_one.labels.end(),
                      [](int l) { return l == 0; }));

    const auto each_own = dpc_cluster(state, 10);
    CHECK(each_own.num_clusters == 10);
    std::vector<int> sorted = each_own.labels;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 10; ++i) CHECK(sorted[i] == i);

    CHECK_THROWS_AS(dpc_cluster(state, 11), std::invalid_argument);
    CHECK_THROWS_AS(dpc_cluster(state, 0), std::invalid_argument);
}

TEST_CASE("dpc: strictly increasing density transforms leave labels unchanged") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> unif(0.1, 5.0);
    const auto ds = random_dataset(60, 8);
    DensityVector dv;
    dv.kind = DensityKind::Kd;
    dv.values.resize(60);
    for (Index i = 0; i < 60; ++i) dv.values[i] = unif(rng);  // tie-free a.s.

    DensityVector transformed = dv;
    for (Index i = 0; i < 60; ++i) transformed.values[i] = std::exp(3.0 * dv.values[i]) + 1.0;

    const auto a = dpc_state(dv, ds);
    const auto b = dpc_state(transformed, ds);
    CHECK(a.nn_higher == b.nn_higher);
    for (int c : {1, 2, 5}) {
        CHECK(dpc_cluster(a, c).labels == dpc_cluster(b, c).labels);
    }
}

TEST_CASE("dpc threshold variant selects centers with gamma >= tau") {
    const auto ds = two_blobs(25, 7);
    DensityVector dv;
    dv.kind = DensityKind::Fkd;
    dv.values = Vector::Ones(50);
    dv.values[3] = 2.0;
    dv.values[30] = 2.0;
    const auto state = dpc_state(dv, ds);

    std::vector<double> gammas(state.gamma.data(), state.gamma.data() + 50);
    std::sort(gammas.rbegin(), gammas.rend());
    const auto result = dpc_cluster_threshold(state, gammas[1]);
    CHECK(result.num_clusters == 2);
    CHECK_THROWS_AS(dpc_cluster_threshold(state, gammas[0] + 1.0), std::invalid_argument);
}

TEST_CASE("dbscan: count density with MinPts threshold reproduces classic dbscan") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Index n = 60 + static_cast<Index>(seed) * 15;
        const auto ds = random_dataset(n, seed + 100);
        const double eps = 0.35 + 0.05 * static_cast<double>(seed % 4);
        const int min_pts = 3 + static_cast<int>(seed % 3);

        const auto graph = build_eps_graph(ds, eps);
        DensityVector counts;
        counts.kind = DensityKind::Naive;
        counts.values.resize(n);
        for (Index i = 0; i < n; ++i) {
            counts.values[i] = static_cast<double>(graph.adjacency[i].size());
        }
        const auto result = dbscan_cluster(counts, graph, static_cast<double>(min_pts));
        const auto reference = canonical(reference_dbscan(ds, eps, min_pts));
        REQUIRE(canonical(result.labels) == reference);
    }
}

TEST_CASE("dbscan: threshold extremes") {
    const auto ds = random_dataset(40, 77);
    const auto graph = build_eps_graph(ds, 10.0);  // complete graph
    DensityVector dv;
    dv.kind = DensityKind::Naive;
    dv.values = Vector::LinSpaced(40, 1.0, 2.0);

    const auto noise = dbscan_cluster(dv, graph, 3.0);  // above max density
    CHECK(noise.num_clusters == 0);
    CHECK(std::all_of(noise.labels.begin(), noise.labels.end(),
                      [](int l) { return l == ClusterResult::kNoise; }));

    const auto single = dbscan_cluster(dv, graph, 0.5);  // below min, connected
    CHECK(single.num_clusters == 1);
    CHECK(std::all_of(single.labels.begin(), single.labels.end(),
                      [](int l) { return l == 0; }));
}

TEST_CASE("cluster results have contiguous labels") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto ds = random_dataset(80, seed + 50);
        const auto graph = build_eps_graph(ds, 0.4);
        DensityVector counts;
        counts.kind = DensityKind::Naive;
        counts.values.resize(80);
        for (Index i = 0; i < 80; ++i) {
            counts.values[i] = static_cast<double>(graph.adjacency[i].size());
        }
        const auto result = dbscan_cluster(counts, graph, 4.0);
        std::vector<bool> seen(result.num_clusters, false);
        for (int l : result.labels) {
            if (l == ClusterResult::kNoise) continue;
            REQUIRE(l >= 0);
            REQUIRE(l < result.num_clusters);
            seen[l] = true;
        }
        for (bool s : seen) CHECK(s);
    }
}

TEST_CASE("pr_curve: hand-checkable grid points") {
    const auto ds = two_blobs(20, 9);
    DensityVector dv;
    dv.kind = DensityKind::Fkd;
    dv.values = Vector::Ones(40);
    dv.values[5] = 3.0;
    dv.values[25] = 2.0;
    const auto state = dpc_state(dv, ds);

    const auto points = pr_curve(state, *ds.labels, {1, 2, 40});
    REQUIRE(points.size() == 3);

    // c = 1: everything predicted-same; precision = truth same-pair fraction
    const double truth_same = 2.0 * (20.0 * 19.0 / 2.0) / (40.0 * 39.0 / 2.0);
    CHECK(points[0].pairwise_precision == doctest::Approx(truth_same));
    CHECK(points[0].pairwise_recall == 1.0);

    // c = true count on separated blobs: perfect
    CHECK(points[1].pairwise_precision == 1.0);
    CHECK(points[1].pairwise_recall == 1.0);

    // c = n: no predicted-same pairs
    CHECK(points[2].pairwise_precision == 0.0);
    CHECK(points[2].pairwise_recall == 0.0);

    CHECK_THROWS_AS(pr_curve(state, *ds.labels, {}), std::invalid_argument);
}

TEST_CASE("labels csv and json exports") {
    ClusterResult result;
    result.labels = {1, -1, 0};
    result.num_clusters = 2;
    result.provenance = {"dbscan", "naive", {{"eps", 0.5}}};

    std::ostringstream csv;
    write_labels_csv(csv, result);
    CHECK(csv.str() == "index,label\n0,1\n1,-1\n2,0\n");

    const auto json = cluster_result_json(result);
    CHECK(json.find("\"num_clusters\": 2") != std::string::npos);
    CHECK(json.find("\"algorithm\": \"dbscan\"") != std::string::npos);
}
