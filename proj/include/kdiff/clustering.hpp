#pragma once

#include "kdiff/common.hpp"
#include "kdiff/dataset.hpp"
#include "kdiff/density.hpp"
#include "kdiff/neighbors.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace kdiff {

/// Where a clustering came from: algorithm, density kind, hyper-parameters.
struct Provenance {
    std::string algorithm;
    std::string density;
    std::map<std::string, double> params;
};

/// Per-point labels; -1 marks noise. Non-noise labels are contiguous
/// 0..num_clusters-1 and every id occurs at least once.
struct ClusterResult {
    static constexpr int kNoise = -1;

    std::vector<int> labels;
    int num_clusters = 0;
    Provenance provenance;
};

/// Density-peaks state. delta[i] is the distance to the nearest point of
/// strictly higher density (ties broken by lower index, so the order is
/// total); the unique order-maximum gets the maximum pairwise distance and
/// nn_higher = kNoHigher. gamma = density * delta ranks center candidates.
struct DpcState {
    static constexpr Index kNoHigher = -1;

    DensityVector density;
    Vector delta;
    std::vector<Index> nn_higher;
    Vector gamma;
};

DpcState dpc_state(const DensityVector& density, const Dataset& ds);

/// DPC with the top-c points by gamma (ties by index) as centers; every other
/// point inherits the label of its nearest higher-density point, resolved in
/// decreasing-density order. No noise label.
ClusterResult dpc_cluster(const DpcState& state, int c);

/// Threshold variant: centers are the points with gamma >= gamma_min.
ClusterResult dpc_cluster_threshold(const DpcState& state, double gamma_min);

/// Density-generalized DBSCAN: core points have density >= core_threshold,
/// clusters are connected components of the core-core eps-adjacency, non-core
/// points adjacent to a core join their nearest core neighbor (tie: lower
/// index), the rest are noise.
ClusterResult dbscan_cluster(const DensityVector& density, const NeighborGraph& eps_graph,
                             double core_threshold);

struct PrPoint {
    int c;
    double pairwise_precision;
    double pairwise_recall;
    double bcubed_precision;
    double bcubed_recall;
};

/// Runs dpc_cluster for every c in the grid and scores against the truth with
/// both metric families.
std::vector<PrPoint> pr_curve(const DpcState& state, const std::vector<int>& truth,
                              const std::vector<int>& c_grid);

/// Writes "index,label" rows.
void write_labels_csv(std::ostream& out, const ClusterResult& result);

/// JSON text with labels and the provenance block.
std::string cluster_result_json(const ClusterResult& result);

}  // namespace kdiff
