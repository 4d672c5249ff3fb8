#pragma once

#include "kdiff/common.hpp"
#include "kdiff/dataset.hpp"

#include <vector>

namespace kdiff {

enum class GraphMode { EpsBall, Knn };

struct NeighborEntry {
    Index index;
    double distance;
};

/// Per-point neighbor lists with exact Euclidean distances.
///
/// eps-ball mode: closed ball (distance <= eps), the point itself included at
/// distance 0, lists sorted by neighbor index. knn mode: exactly k neighbors,
/// self excluded, ties at the k-th distance broken toward the lower index,
/// lists sorted by (distance, index).
struct NeighborGraph {
    GraphMode mode = GraphMode::EpsBall;
    double eps = 0.0;  // EpsBall only
    int k = 0;         // Knn only
    Index n = 0;
    std::vector<std::vector<NeighborEntry>> adjacency;
};

/// Query strategy. Both paths return identical graphs; BruteForce is the
/// O(n^2) oracle, KdTree the spatial index. Auto picks by size.
enum class SearchPath { Auto, BruteForce, KdTree };

NeighborGraph build_eps_graph(const Dataset& ds, double eps, SearchPath path = SearchPath::Auto);

NeighborGraph build_knn_graph(const Dataset& ds, int k, SearchPath path = SearchPath::Auto);

/// Exact Euclidean distance between points i and j, computed with the same
/// accumulation order as the graph builders (stored graph distances are
/// bit-identical to this function's output).
double pairwise_distance(const Dataset& ds, Index i, Index j);

}  // namespace kdiff
