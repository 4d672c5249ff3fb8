#include "kdiff/density.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <vector>

namespace kdiff {

namespace {

std::string format_residual(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3e", v);
    return buf;
}

// Strongly connected components of the sparsity pattern (iterative Tarjan).
int count_scc(const SparseRowMatrix& m) {
    const Index n = m.rows();
    std::vector<int> index(n, -1), lowlink(n, 0);
    std::vector<bool> on_stack(n, false);
    std::vector<Index> stack;
    int next_index = 0;
    int components = 0;

    struct Frame {
        Index v;
        SparseRowMatrix::InnerIterator it;
    };
    std::vector<Frame> call;

    for (Index root = 0; root < n; ++root) {
        if (index[root] >= 0) continue;
        call.push_back({root, SparseRowMatrix::InnerIterator(m, root)});
        index[root] = lowlink[root] = next_index++;
        stack.push_back(root);
        on_stack[root] = true;

        while (!call.empty()) {
            auto& frame = call.back();
            bool descended = false;
            for (; frame.it; ++frame.it) {
                const Index w = frame.it.col();
                if (index[w] < 0) {
                    ++frame.it;  // resume past w on return
                    call.push_back({w, SparseRowMatrix::InnerIterator(m, w)});
                    index[w] = lowlink[w] = next_index++;
                    stack.push_back(w);
                    on_stack[w] = true;
                    descended = true;
                    break;
                }
                if (on_stack[w]) lowlink[frame.v] = std::min(lowlink[frame.v], index[w]);
            }
            if (descended) continue;

            const Index v = frame.v;
            if (lowlink[v] == index[v]) {
                ++components;
                Index w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = false;
                } while (w != v);
            }
            call.pop_back();
            if (!call.empty()) {
                lowlink[call.back().v] = std::min(lowlink[call.back().v], lowlink[v]);
            }
        }
    }
    return components;
}

// Period of a strongly connected chain: gcd over all edges u->v of
// |level(u) + 1 - level(v)| with BFS levels from node 0.
int chain_period(const SparseRowMatrix& m) {
    const Index n = m.rows();
    std::vector<Index> level(n, -1);
    std::vector<Index> queue;
    queue.reserve(n);
    queue.push_back(0);
    level[0] = 0;
    for (std::size_t head = 0; head < queue.size(); ++head) {
        const Index u = queue[head];
        for (SparseRowMatrix::InnerIterator it(m, u); it; ++it) {
            if (level[it.col()] < 0) {
                level[it.col()] = level[u] + 1;
                queue.push_back(it.col());
            }
        }
    }
    long long g = 0;
    for (Index u = 0; u < n; ++u) {
        for (SparseRowMatrix::InnerIterator it(m, u); it; ++it) {
            const long long diff = level[u] + 1 - level[it.col()];
            g = std::gcd(g, diff < 0 ? -diff : diff);
            if (g == 1) return 1;
        }
    }
    return g == 0 ? 1 : static_cast<int>(g);
}

}  // namespace

std::string to_string(DensityKind kind) {
    switch (kind) {
        case DensityKind::Naive: return "naive";
        case DensityKind::LocalContrast: return "lc";
        case DensityKind::Kd: return "kd";
        case DensityKind::Fkd: return "fkd";
        case DensityKind::FkdNormalized: return "fkd-normalized";
    }
    return "?";
}

double unit_ball_volume(int d) {
    if (d < 0) throw std::invalid_argument("unit_ball_volume: d must be nonnegative");
    // Gamma(d/2 + 1) by the recurrence Gamma(z+1) = z Gamma(z) starting from
    // Gamma(1/2) = sqrt(pi) or Gamma(1) = 1.
    double g = (d % 2 == 0) ? 1.0 : std::sqrt(M_PI);
    double z = (d % 2 == 0) ? 1.0 : 0.5;
    const double target = d / 2.0 + 1.0;
    while (z < target - 0.25) {
        g *= z;
        z += 1.0;
    }
    return std::pow(M_PI, d / 2.0) / g;
}

DensityVector density_naive(const NeighborGraph& eps_graph, int dim) {
    if (eps_graph.mode != GraphMode::EpsBall) {
        throw std::invalid_argument("density_naive needs an eps-ball graph");
    }
    const Index n = eps_graph.n;
    const double normalization =
        static_cast<double>(n) * std::pow(eps_graph.eps, dim) * unit_ball_volume(dim);

    DensityVector dv;
    dv.kind = DensityKind::Naive;
    dv.params["eps"] = eps_graph.eps;
    dv.values.resize(n);
    for (Index i = 0; i < n; ++i) {
        dv.values[i] = static_cast<double>(eps_graph.adjacency[i].size()) / normalization;
    }
    return dv;
}

DensityVector density_naive(const Dataset& ds, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("density_naive: eps must be positive");
    return density_naive(build_eps_graph(ds, eps), static_cast<int>(ds.dim()));
}

DensityVector density_lc(const DensityVector& naive, const NeighborGraph& knn_graph) {
    if (knn_graph.mode != GraphMode::Knn) {
        throw std::invalid_argument("density_lc needs a knn graph");
    }
    const Index n = naive.size();
    if (knn_graph.n != n) throw std::invalid_argument("density_lc: graph/density size mismatch");

    DensityVector dv;
    dv.kind = DensityKind::LocalContrast;
    dv.params = naive.params;
    dv.params["k"] = knn_graph.k;
    dv.values.resize(n);
    for (Index i = 0; i < n; ++i) {
        int wins = 0;
        for (const auto& nb : knn_graph.adjacency[i]) {
            if (naive.values[i] > naive.values[nb.index]) ++wins;
        }
        dv.values[i] = static_cast<double>(wins) / static_cast<double>(n);
    }
    return dv;
}

TransitionMatrix build_transition(const SparseKernel& kmat) {
    const Index n = kmat.size();
    TransitionMatrix P;
    P.degrees.resize(n);
    P.probs = kmat.values;
    for (Index i = 0; i < n; ++i) {
        double degree = 0.0;
        for (SparseRowMatrix::InnerIterator it(kmat.values, i); it; ++it) degree += it.value();
        if (!(degree > 0.0)) {
            throw std::invalid_argument(
                "build_transition: zero-degree row " + std::to_string(i) +
                " (isolated point under this kernel; widen eps or raise k)");
        }
        P.degrees[i] = degree;
        for (SparseRowMatrix::InnerIterator it(P.probs, i); it; ++it) {
            it.valueRef() /= degree;
        }
    }
    return P;
}

DensityVector density_kd(const TransitionMatrix& P, const PowerIterationOptions& opts) {
    const Index n = P.size();
    if (n == 0) throw std::invalid_argument("density_kd: empty transition matrix");
    if (!(opts.tol > 0.0)) throw std::invalid_argument("density_kd: tol must be positive");
    if (opts.max_iter < 1) throw std::invalid_argument("density_kd: max_iter must be >= 1");
    if (opts.damping < 0.0 || opts.damping >= 1.0) {
        throw std::invalid_argument("density_kd: damping must lie in [0, 1)");
    }

    if (opts.damping == 0.0) {
        const int scc = count_scc(P.probs);
        if (scc > 1) {
            throw ConvergenceError("density_kd: chain is reducible (" + std::to_string(scc) +
                                   " strongly connected components); no unique stationary "
                                   "distribution. Retry with damping > 0.");
        }
        const int period = chain_period(P.probs);
        if (period > 1) {
            throw ConvergenceError("density_kd: chain is periodic (period " +
                                   std::to_string(period) +
                                   "); power iteration cannot converge. Retry with damping > 0.");
        }
    }

    const double beta = opts.damping;
    Vector pi = Vector::Constant(n, 1.0 / static_cast<double>(n));
    Vector next(n);

    double best_diff = std::numeric_limits<double>::infinity();
    int stalled = 0;
    constexpr int kStallWindow = 500;
    double diff = std::numeric_limits<double>::infinity();

    for (int iter = 1; iter <= opts.max_iter; ++iter) {
        next.setZero();
        for (Index i = 0; i < n; ++i) {
            const double w = pi[i];
            for (SparseRowMatrix::InnerIterator it(P.probs, i); it; ++it) {
                next[it.col()] += w * it.value();
            }
        }
        if (beta > 0.0) {
            next = (1.0 - beta) * next + Vector::Constant(n, beta / static_cast<double>(n));
        }
        next /= next.sum();

        diff = (next - pi).lpNorm<1>();
        if (diff <= opts.tol) {
            // pi itself has stationarity residual == diff under the iterated
            // operator, which is what the contract promises.
            DensityVector dv;
            dv.kind = DensityKind::Kd;
            dv.values = pi;
            dv.params["tol"] = opts.tol;
            dv.params["max_iter"] = opts.max_iter;
            dv.params["iterations"] = iter;
            if (beta > 0.0) dv.params["damping"] = beta;
            return dv;
        }

        if (diff < best_diff * (1.0 - 1e-12)) {
            best_diff = diff;
            stalled = 0;
        } else if (++stalled >= kStallWindow) {
            throw ConvergenceError(
                "density_kd: power iteration stalled (L1 change " + format_residual(diff) +
                " has not improved for " + std::to_string(kStallWindow) +
                " iterations); the chain is effectively reducible or periodic. "
                "Retry with damping > 0.");
        }
        pi.swap(next);
    }
    throw ConvergenceError("density_kd: no convergence after " + std::to_string(opts.max_iter) +
                           " iterations (last L1 change " + format_residual(diff) +
                           "); retry with damping > 0 or a larger max_iter.");
}

DensityVector stationary_exact(const TransitionMatrix& P) {
    const Index n = P.size();
    if (n > 5000) {
        throw std::invalid_argument("stationary_exact: dense solve guarded to n <= 5000 (n = " +
                                    std::to_string(n) + ")");
    }

    // Column sums g; solving pi^T (I - P + e g^T) = g^T as the transposed
    // system (I - P^T + g e^T) pi = g.
    Vector g = Vector::Zero(n);
    for (Index i = 0; i < n; ++i) {
        for (SparseRowMatrix::InnerIterator it(P.probs, i); it; ++it) {
            g[it.col()] += it.value();
        }
    }

    Matrix M = Matrix::Identity(n, n) - Matrix(SparseRowMatrix(P.probs.transpose()));
    M.noalias() += g * Eigen::RowVectorXd::Ones(n);

    Vector pi = M.partialPivLu().solve(g);
    const double residual = (M * pi - g).lpNorm<Eigen::Infinity>();
    const double scale = std::max(1.0, g.lpNorm<Eigen::Infinity>());
    if (!pi.allFinite() || residual > 1e-8 * scale) {
        throw ConvergenceError(
            "stationary_exact: singular linear system (residual " + format_residual(residual) +
            "); the chain appears reducible.");
    }

    pi = pi.cwiseMax(0.0);
    const double sum = pi.sum();
    if (!(sum > 0.0)) {
        throw ConvergenceError("stationary_exact: degenerate solution; the chain appears reducible.");
    }
    pi /= sum;

    DensityVector dv;
    dv.kind = DensityKind::Kd;
    dv.values = std::move(pi);
    dv.params["exact_solve"] = 1.0;
    return dv;
}

DensityVector density_fkd(const TransitionMatrix& P) {
    const Index n = P.size();
    DensityVector dv;
    dv.kind = DensityKind::Fkd;
    dv.values = Vector::Zero(n);
    for (Index i = 0; i < n; ++i) {
        for (SparseRowMatrix::InnerIterator it(P.probs, i); it; ++it) {
            dv.values[it.col()] += it.value();
        }
    }
    return dv;
}

Vector fkd_cluster_mean(const DensityVector& fkd, const std::vector<int>& labels) {
    const Index n = fkd.size();
    if (static_cast<Index>(labels.size()) != n) {
        throw std::invalid_argument("fkd_cluster_mean: labels/density size mismatch");
    }
    int m = 0;
    for (int id : labels) {
        if (id < 0) throw std::invalid_argument("fkd_cluster_mean: labels must be nonnegative");
        m = std::max(m, id + 1);
    }
    Vector sums = Vector::Zero(m);
    Vector counts = Vector::Zero(m);
    for (Index i = 0; i < n; ++i) {
        sums[labels[i]] += fkd.values[i];
        counts[labels[i]] += 1.0;
    }
    for (int j = 0; j < m; ++j) {
        if (counts[j] == 0.0) {
            throw std::invalid_argument("fkd_cluster_mean: label id " + std::to_string(j) +
                                        " has no points (labels must partition 0..m-1)");
        }
    }
    return sums.cwiseQuotient(counts);
}

DensityVector sum_normalized(const DensityVector& dv) {
    DensityVector out = dv;
    const double sum = out.values.sum();
    if (!(sum > 0.0)) throw std::invalid_argument("sum_normalized: values must have positive sum");
    out.values /= sum;
    if (out.kind == DensityKind::Fkd) out.kind = DensityKind::FkdNormalized;
    return out;
}

void write_density_csv(std::ostream& out, const DensityVector& dv) {
    const std::string kind = to_string(dv.kind);
    out << "index,value,kind\n" << std::setprecision(17);
    for (Index i = 0; i < dv.size(); ++i) {
        out << i << ',' << dv.values[i] << ',' << kind << '\n';
    }
}

}  // namespace kdiff
