#pragma once

#include "kdiff/common.hpp"
#include "kdiff/dataset.hpp"
#include "kdiff/kernels.hpp"
#include "kdiff/neighbors.hpp"

#include <iosfwd>
#include <map>
#include <string>

namespace kdiff {

/// Row-stochastic random-walk matrix p(x,y) = k(x,y)/d(x) together with the
/// degree vector d(x) = sum_y k(x,y). Every row sums to 1 within 1e-12.
struct TransitionMatrix {
    SparseRowMatrix probs;  // n x n, entries in [0,1]
    Vector degrees;         // strictly positive

    Index size() const { return probs.rows(); }
    Index nonzeros() const { return probs.nonZeros(); }
};

enum class DensityKind { Naive, LocalContrast, Kd, Fkd, FkdNormalized };

std::string to_string(DensityKind kind);

/// Per-point density values tagged with the function that produced them and
/// the hyper-parameters used.
struct DensityVector {
    Vector values;
    DensityKind kind = DensityKind::Naive;
    std::map<std::string, double> params;

    Index size() const { return values.size(); }
};

/// Volume of the unit d-ball, pi^(d/2) / Gamma(d/2 + 1). Gamma is evaluated
/// with the half-integer recurrence, exact for small integer d.
double unit_ball_volume(int d);

/// Ball-count density: |B(x,eps) & D| / (n eps^d V_d), self included.
DensityVector density_naive(const Dataset& ds, double eps);

/// Same, from a prebuilt eps-ball graph; `dim` is the feature dimension used
/// in the normalizing constant.
DensityVector density_naive(const NeighborGraph& eps_graph, int dim);

/// Local contrast: fraction (out of n) of k-nearest neighbors whose naive
/// density is strictly lower.
DensityVector density_lc(const DensityVector& naive, const NeighborGraph& knn_graph);

/// Row-normalizes a kernel into the random-walk transition matrix. Throws if
/// a kernel row is empty (isolated point: widen eps or raise k).
TransitionMatrix build_transition(const SparseKernel& kmat);

struct PowerIterationOptions {
    double tol = 1e-10;    // L1 tolerance on the stationarity residual
    int max_iter = 10000;
    double damping = 0.0;  // beta in P' = (1-beta) P + beta/n * ones
};

/// Kernel diffusion density: the stationary distribution of the walk,
/// computed by left power iteration from the uniform start vector. With
/// damping = 0 the chain's ergodicity is verified first (strongly connected
/// and aperiodic); reducible or periodic chains raise ConvergenceError with a
/// diagnosis, as does a stalled or non-converged iteration. The returned
/// vector sums to 1 and satisfies ||pi^T P - pi^T||_1 <= tol against the
/// (damped, if damping > 0) operator.
DensityVector density_kd(const TransitionMatrix& P, const PowerIterationOptions& opts = {});

/// Exact stationary distribution via the dense linear system
/// pi^T (I - P + e g^T) = g^T with g the column-sum vector of P. Oracle for
/// density_kd on small problems (guard n <= 5000). Throws ConvergenceError
/// when the system is singular (reducible chain).
DensityVector stationary_exact(const TransitionMatrix& P);

/// Fast kernel diffusion density: the column sums of P. One pass over the
/// stored entries, O(nnz) time and O(n) space. The values sum to n.
DensityVector density_fkd(const TransitionMatrix& P);

/// Mean FKD value within each label group; labels must be dense ids 0..m-1
/// covering every point.
Vector fkd_cluster_mean(const DensityVector& fkd, const std::vector<int>& labels);

/// Scales the values to sum 1 (Fkd becomes FkdNormalized; other kinds keep
/// their tag).
DensityVector sum_normalized(const DensityVector& dv);

/// Writes "index,value,kind" rows.
void write_density_csv(std::ostream& out, const DensityVector& dv);

}  // namespace kdiff
