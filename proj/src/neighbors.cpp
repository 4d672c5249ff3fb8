#include "kdiff/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

namespace kdiff {

namespace {

// Sequential accumulation shared by every query path; the brute-force and
// kd-tree results are bit-identical because candidates are always scored with
// this exact loop.
double dist_sq(const double* a, const double* b, Index d) {
    double s = 0.0;
    for (Index t = 0; t < d; ++t) {
        const double diff = a[t] - b[t];
        s += diff * diff;
    }
    return s;
}

// Pruning slack: box lower bounds dominate the exact distance mathematically,
// but the relative margin keeps pruning safe under any FP reordering.
constexpr double kPruneSlack = 1.0 + 1e-12;

struct PackedPoints {
    std::vector<double> data;  // row-major n x d
    Index n = 0;
    Index d = 0;

    explicit PackedPoints(const Matrix& pts) : n(pts.rows()), d(pts.cols()) {
        data.resize(static_cast<std::size_t>(n) * d);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < d; ++j) data[static_cast<std::size_t>(i) * d + j] = pts(i, j);
    }

    const double* row(Index i) const { return data.data() + static_cast<std::size_t>(i) * d; }
};

class KdTree {
public:
    explicit KdTree(const PackedPoints& pts) : pts_(pts) {
        order_.resize(pts.n);
        for (Index i = 0; i < pts.n; ++i) order_[i] = i;
        nodes_.reserve(static_cast<std::size_t>(2 * pts.n / kLeafSize + 2));
        root_ = build(0, pts.n);
    }

    // All j with dist(q, x_j) <= eps, self included when q is a dataset point.
    void radius_query(const double* q, double eps_sq, std::vector<NeighborEntry>& out) const {
        out.clear();
        radius_rec(root_, q, eps_sq, out);
        std::sort(out.begin(), out.end(),
                  [](const NeighborEntry& a, const NeighborEntry& b) { return a.index < b.index; });
    }

    // k nearest excluding `skip`; ties at the k-th distance resolved toward
    // the lower index. Result sorted by (distance, index).
    void knn_query(const double* q, int k, Index skip, std::vector<NeighborEntry>& out) const {
        heap_.clear();
        knn_rec(root_, q, k, skip);
        out.resize(heap_.size());
        for (std::size_t t = 0; t < heap_.size(); ++t) {
            out[t] = {heap_[t].second, std::sqrt(heap_[t].first)};
        }
        std::sort(out.begin(), out.end(), [](const NeighborEntry& a, const NeighborEntry& b) {
            return a.distance != b.distance ? a.distance < b.distance : a.index < b.index;
        });
    }

private:
    static constexpr Index kLeafSize = 16;

    struct Node {
        Index begin, end;       // range in order_
        int left = -1, right = -1;
        Vector box_min, box_max;
        bool leaf() const { return left < 0; }
    };

    int build(Index begin, Index end) {
        Node node;
        node.begin = begin;
        node.end = end;
        node.box_min = Vector::Constant(pts_.d, std::numeric_limits<double>::infinity());
        node.box_max = Vector::Constant(pts_.d, -std::numeric_limits<double>::infinity());
        for (Index t = begin; t < end; ++t) {
            const double* p = pts_.row(order_[t]);
            for (Index j = 0; j < pts_.d; ++j) {
                node.box_min[j] = std::min(node.box_min[j], p[j]);
                node.box_max[j] = std::max(node.box_max[j], p[j]);
            }
        }
        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back(node);
        if (end - begin <= kLeafSize) return id;

        Index split_dim = 0;
        double widest = -1.0;
        for (Index j = 0; j < pts_.d; ++j) {
            const double w = node.box_max[j] - node.box_min[j];
            if (w > widest) {
                widest = w;
                split_dim = j;
            }
        }
        if (widest <= 0.0) return id;  // all points identical: keep as leaf

        const Index mid = begin + (end - begin) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](Index a, Index b) {
                             const double va = pts_.row(a)[split_dim];
                             const double vb = pts_.row(b)[split_dim];
                             return va != vb ? va < vb : a < b;
                         });
        const int left = build(begin, mid);
        const int right = build(mid, end);
        nodes_[id].left = left;
        nodes_[id].right = right;
        return id;
    }

    double box_dist_sq(const Node& node, const double* q) const {
        double s = 0.0;
        for (Index j = 0; j < pts_.d; ++j) {
            double gap = 0.0;
            if (q[j] < node.box_min[j]) gap = node.box_min[j] - q[j];
            else if (q[j] > node.box_max[j]) gap = q[j] - node.box_max[j];
            s += gap * gap;
        }
        return s;
    }

    void radius_rec(int id, const double* q, double eps_sq, std::vector<NeighborEntry>& out) const {
        const Node& node = nodes_[id];
        if (box_dist_sq(node, q) > eps_sq * kPruneSlack) return;
        if (node.leaf()) {
            for (Index t = node.begin; t < node.end; ++t) {
                const Index j = order_[t];
                const double dsq = dist_sq(q, pts_.row(j), pts_.d);
                if (dsq <= eps_sq) out.push_back({j, std::sqrt(dsq)});
            }
            return;
        }
        radius_rec(node.left, q, eps_sq, out);
        radius_rec(node.right, q, eps_sq, out);
    }

    // Max-heap entry ordering: worst candidate on top, where worse means
    // (larger distance) or (equal distance and larger index).
    struct HeapLess {
        bool operator()(const std::pair<double, Index>& a, const std::pair<double, Index>& b) const {
            return a.first != b.first ? a.first < b.first : a.second < b.second;
        }
    };

    void knn_rec(int id, const double* q, int k, Index skip) const {
        const Node& node = nodes_[id];
        if (static_cast<int>(heap_.size()) == k &&
            box_dist_sq(node, q) > heap_.front().first * kPruneSlack) {
            return;
        }
        if (node.leaf()) {
            for (Index t = node.begin; t < node.end; ++t) {
                const Index j = order_[t];
                if (j == skip) continue;
                const double dsq = dist_sq(q, pts_.row(j), pts_.d);
                if (static_cast<int>(heap_.size()) < k) {
                    heap_.emplace_back(dsq, j);
                    std::push_heap(heap_.begin(), heap_.end(), HeapLess{});
                } else {
                    const auto& worst = heap_.front();
                    if (dsq < worst.first || (dsq == worst.first && j < worst.second)) {
                        std::pop_heap(heap_.begin(), heap_.end(), HeapLess{});
                        heap_.back() = {dsq, j};
                        std::push_heap(heap_.begin(), heap_.end(), HeapLess{});
                    }
                }
            }
            return;
        }
        // Visit the nearer child first so the heap tightens early.
        const double dl = box_dist_sq(nodes_[node.left], q);
        const double dr = box_dist_sq(nodes_[node.right], q);
        if (dl <= dr) {
            knn_rec(node.left, q, k, skip);
            knn_rec(node.right, q, k, skip);
        } else {
            knn_rec(node.right, q, k, skip);
            knn_rec(node.left, q, k, skip);
        }
    }

    const PackedPoints& pts_;
    std::vector<Index> order_;
    std::vector<Node> nodes_;
    int root_ = 0;
    mutable std::vector<std::pair<double, Index>> heap_;
};

bool use_tree(SearchPath path, Index n) {
    switch (path) {
        case SearchPath::BruteForce: return false;
        case SearchPath::KdTree: return true;
        case SearchPath::Auto: return n >= 64;
    }
    return true;
}

}  // namespace

NeighborGraph build_eps_graph(const Dataset& ds, double eps, SearchPath path) {
    if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
    const PackedPoints pts(ds.points);
    const double eps_sq = eps * eps;

    NeighborGraph g;
    g.mode = GraphMode::EpsBall;
    g.eps = eps;
    g.n = pts.n;
    g.adjacency.resize(pts.n);

    if (use_tree(path, pts.n)) {
        const KdTree tree(pts);
        for (Index i = 0; i < pts.n; ++i) tree.radius_query(pts.row(i), eps_sq, g.adjacency[i]);
    } else {
        for (Index i = 0; i < pts.n; ++i) {
            auto& list = g.adjacency[i];
            for (Index j = 0; j < pts.n; ++j) {
                const double dsq = dist_sq(pts.row(i), pts.row(j), pts.d);
                if (dsq <= eps_sq) list.push_back({j, std::sqrt(dsq)});
            }
        }
    }
    return g;
}

NeighborGraph build_knn_graph(const Dataset& ds, int k, SearchPath path) {
    const Index n = ds.size();
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (k >= n) {
        throw std::invalid_argument("k = " + std::to_string(k) + " requires k <= n-1 (n = " +
                                    std::to_string(n) + ")");
    }
    const PackedPoints pts(ds.points);

    NeighborGraph g;
    g.mode = GraphMode::Knn;
    g.k = k;
    g.n = n;
    g.adjacency.resize(n);

    if (use_tree(path, n)) {
        const KdTree tree(pts);
        for (Index i = 0; i < n; ++i) tree.knn_query(pts.row(i), k, i, g.adjacency[i]);
    } else {
        std::vector<std::pair<double, Index>> cand;
        cand.reserve(n - 1);
        for (Index i = 0; i < n; ++i) {
            cand.clear();
            for (Index j = 0; j < n; ++j) {
                if (j == i) continue;
                cand.emplace_back(dist_sq(pts.row(i), pts.row(j), pts.d), j);
            }
            std::nth_element(cand.begin(), cand.begin() + (k - 1), cand.end());
            cand.resize(k);
            std::sort(cand.begin(), cand.end());
            auto& list = g.adjacency[i];
            list.resize(k);
            for (int t = 0; t < k; ++t) list[t] = {cand[t].second, std::sqrt(cand[t].first)};
        }
    }
    return g;
}

double pairwise_distance(const Dataset& ds, Index i, Index j) {
    const Index n = ds.size();
    if (i < 0 || i >= n || j < 0 || j >= n) {
        throw std::out_of_range("pairwise_distance: index out of range");
    }
    double s = 0.0;
    for (Index t = 0; t < ds.dim(); ++t) {
        const double diff = ds.points(i, t) - ds.points(j, t);
        s += diff * diff;
    }
    return std::sqrt(s);
}

}  // namespace kdiff
