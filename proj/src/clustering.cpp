#include "kdiff/clustering.hpp"

#include "kdiff/metrics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <vector>

namespace kdiff {

namespace {

// Strict total order: higher density wins, ties go to the lower index.
struct DenserThan {
    const Vector& rho;
    bool operator()(Index a, Index b) const {
        return rho[a] != rho[b] ? rho[a] > rho[b] : a < b;
    }
};

// Relabel to contiguous ids 0..K-1 in order of first appearance; noise stays -1.
int compact_labels(std::vector<int>& labels) {
    std::vector<int> remap;
    std::vector<int> seen;  // old id -> new id + 1 (0 = unseen)
    int top = -1;
    for (int l : labels) top = std::max(top, l);
    seen.assign(top + 1, 0);
    int next = 0;
    for (int& l : labels) {
        if (l < 0) continue;
        if (seen[l] == 0) seen[l] = ++next;
        l = seen[l] - 1;
    }
    return next;
}

struct DisjointSet {
    std::vector<Index> parent;
    explicit DisjointSet(Index n) : parent(n) { std::iota(parent.begin(), parent.end(), Index{0}); }
    Index find(Index x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(Index a, Index b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

}  // namespace

DpcState dpc_state(const DensityVector& density, const Dataset& ds) {
    const Index n = ds.size();
    if (density.size() != n) throw std::invalid_argument("dpc_state: density/dataset size mismatch");
    const Index d = ds.dim();

    // Row-major copy for the O(n^2) distance sweep.
    std::vector<double> pts(static_cast<std::size_t>(n) * d);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < d; ++j) pts[static_cast<std::size_t>(i) * d + j] = ds.points(i, j);

    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), DenserThan{density.values});

    DpcState state;
    state.density = density;
    state.delta.resize(n);
    state.nn_higher.assign(n, DpcState::kNoHigher);

    double max_pairwise_sq = 0.0;
    for (Index p = 1; p < n; ++p) {
        const Index i = order[p];
        const double* xi = pts.data() + static_cast<std::size_t>(i) * d;
        double best_sq = std::numeric_limits<double>::infinity();
        Index best = DpcState::kNoHigher;
        for (Index q = 0; q < p; ++q) {
            const Index j = order[q];
            const double* xj = pts.data() + static_cast<std::size_t>(j) * d;
            double s = 0.0;
            for (Index t = 0; t < d; ++t) {
                const double diff = xi[t] - xj[t];
                s += diff * diff;
            }
            if (s < best_sq) {  // distance ties keep the denser candidate
                best_sq = s;
                best = j;
            }
            max_pairwise_sq = std::max(max_pairwise_sq, s);
        }
        state.delta[i] = std::sqrt(best_sq);
        state.nn_higher[i] = best;
    }
    state.delta[order[0]] = n > 1 ? std::sqrt(max_pairwise_sq) : 0.0;

    state.gamma = state.density.values.cwiseProduct(state.delta);
    return state;
}

namespace {

ClusterResult assign_from_centers(const DpcState& state, const std::vector<Index>& centers) {
    const Index n = state.delta.size();
    std::vector<int> labels(n, ClusterResult::kNoise);
    for (std::size_t c = 0; c < centers.size(); ++c) labels[centers[c]] = static_cast<int>(c);

    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), DenserThan{state.density.values});

    // Decreasing-density order guarantees nn_higher is already labeled; every
    // chain ends at a center because the density maximum is always one.
    for (Index p = 0; p < n; ++p) {
        const Index i = order[p];
        if (labels[i] >= 0) continue;
        labels[i] = labels[state.nn_higher[i]];
    }

    ClusterResult result;
    result.labels = std::move(labels);
    result.num_clusters = static_cast<int>(centers.size());
    result.provenance.algorithm = "dpc";
    result.provenance.density = to_string(state.density.kind);
    result.provenance.params = state.density.params;
    return result;
}

std::vector<Index> gamma_order(const DpcState& state) {
    std::vector<Index> order(state.gamma.size());
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), DenserThan{state.gamma});
    return order;
}

}  // namespace

ClusterResult dpc_cluster(const DpcState& state, int c) {
    const Index n = state.delta.size();
    if (c < 1 || c > n) {
        throw std::invalid_argument("dpc_cluster: c must lie in [1, n] (c = " + std::to_string(c) +
                                    ", n = " + std::to_string(n) + ")");
    }
    auto order = gamma_order(state);
    order.resize(c);
    auto result = assign_from_centers(state, order);
    result.provenance.params["c"] = c;
    return result;
}

ClusterResult dpc_cluster_threshold(const DpcState& state, double gamma_min) {
    std::vector<Index> centers;
    for (Index i : gamma_order(state)) {
        if (state.gamma[i] >= gamma_min) centers.push_back(i);
    }
    if (centers.empty()) {
        throw std::invalid_argument("dpc_cluster_threshold: no point reaches gamma >= " +
                                    std::to_string(gamma_min));
    }
    auto result = assign_from_centers(state, centers);
    result.provenance.params["gamma_min"] = gamma_min;
    return result;
}

ClusterResult dbscan_cluster(const DensityVector& density, const NeighborGraph& eps_graph,
                             double core_threshold) {
    if (eps_graph.mode != GraphMode::EpsBall) {
        throw std::invalid_argument("dbscan_cluster needs an eps-ball graph");
    }
    const Index n = eps_graph.n;
    if (density.size() != n) {
        throw std::invalid_argument("dbscan_cluster: density/graph size mismatch");
    }

    std::vector<bool> core(n);
    for (Index i = 0; i < n; ++i) core[i] = density.values[i] >= core_threshold;

    DisjointSet components(n);
    for (Index i = 0; i < n; ++i) {
        if (!core[i]) continue;
        for (const auto& nb : eps_graph.adjacency[i]) {
            if (nb.index != i && core[nb.index]) components.unite(i, nb.index);
        }
    }

    std::vector<int> labels(n, ClusterResult::kNoise);
    for (Index i = 0; i < n; ++i) {
        if (core[i]) labels[i] = static_cast<int>(components.find(i));
    }
    // Border points join the nearest core neighbor (tie: lower index).
    for (Index i = 0; i < n; ++i) {
        if (core[i]) continue;
        double best = std::numeric_limits<double>::infinity();
        Index best_core = -1;
        for (const auto& nb : eps_graph.adjacency[i]) {
            if (nb.index == i || !core[nb.index]) continue;
            if (nb.distance < best || (nb.distance == best && nb.index < best_core)) {
                best = nb.distance;
                best_core = nb.index;
            }
        }
        if (best_core >= 0) labels[i] = static_cast<int>(components.find(best_core));
    }

    ClusterResult result;
    result.num_clusters = compact_labels(labels);
    result.labels = std::move(labels);
    result.provenance.algorithm = "dbscan";
    result.provenance.density = to_string(density.kind);
    result.provenance.params = density.params;
    result.provenance.params["core_threshold"] = core_threshold;
    return result;
}

std::vector<PrPoint> pr_curve(const DpcState& state, const std::vector<int>& truth,
                              const std::vector<int>& c_grid) {
    if (c_grid.empty()) throw std::invalid_argument("pr_curve: empty c grid");
    if (static_cast<Index>(truth.size()) != state.delta.size()) {
        throw std::invalid_argument("pr_curve: truth size mismatch");
    }
    std::vector<PrPoint> points;
    points.reserve(c_grid.size());
    for (int c : c_grid) {
        const auto result = dpc_cluster(state, c);
        const auto pw = pairwise_scores(result.labels, truth);
        const auto bc = bcubed_scores(result.labels, truth);
        points.push_back({c, pw.precision, pw.recall, bc.precision, bc.recall});
    }
    return points;
}

void write_labels_csv(std::ostream& out, const ClusterResult& result) {
    out << "index,label\n";
    for (std::size_t i = 0; i < result.labels.size(); ++i) {
        out << i << ',' << result.labels[i] << '\n';
    }
}

std::string cluster_result_json(const ClusterResult& result) {
    nlohmann::json j;
    j["labels"] = result.labels;
    j["num_clusters"] = result.num_clusters;
    j["provenance"] = {{"algorithm", result.provenance.algorithm},
                       {"density", result.provenance.density},
                       {"params", result.provenance.params}};
    return j.dump(2);
}

}  // namespace kdiff
