#pragma once

#include "kdiff/common.hpp"
#include "kdiff/dataset.hpp"
#include "kdiff/neighbors.hpp"

#include <string>

namespace kdiff {

enum class KernelFamily { IndicatorBall, SymmetricGaussian, AsymmetricGaussian };

std::string to_string(KernelFamily family);

/// Parameters of a bivariate kernel. Ball families need eps, the asymmetric
/// family needs k, the Gaussian families need a bandwidth h.
struct KernelSpec {
    KernelFamily family = KernelFamily::SymmetricGaussian;
    double eps = 0.0;
    int k = 0;
    double h = 0.5;

    void validate() const;  // throws std::invalid_argument
};

/// Sparse nonnegative kernel matrix over a neighbor graph. Stored values are
/// strictly positive; Gaussian values are clamped below at 1e-300 so the row
/// support matches the neighbor graph exactly.
struct SparseKernel {
    SparseRowMatrix values;  // n x n

    Index size() const { return values.rows(); }
    Index nonzeros() const { return values.nonZeros(); }
};

/// Evaluates the kernel over the graph the family implies (eps-ball for the
/// ball families, knn for the asymmetric family), building that graph
/// internally.
SparseKernel kernel_matrix(const Dataset& ds, const KernelSpec& spec);

/// Same, over a prebuilt graph (must match the family's mode and parameter).
SparseKernel kernel_matrix(const Dataset& ds, const KernelSpec& spec, const NeighborGraph& graph);

/// True iff every stored (i,j,v) is mirrored by (j,i,v') with |v-v'| <= tol,
/// treating missing entries as 0.
bool is_symmetric(const SparseKernel& kmat, double tol = 1e-12);

}  // namespace kdiff
