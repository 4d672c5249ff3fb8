#include "kdiff/kernels.hpp"

#include <cmath>
#include <vector>

namespace kdiff {

namespace {

// Floor for Gaussian values so the row support matches the neighbor graph and
// degrees stay positive even when exp underflows.
constexpr double kValueFloor = 1e-300;

}  // namespace

std::string to_string(KernelFamily family) {
    switch (family) {
        case KernelFamily::IndicatorBall: return "indicator-ball";
        case KernelFamily::SymmetricGaussian: return "symmetric-gaussian";
        case KernelFamily::AsymmetricGaussian: return "asymmetric-gaussian";
    }
    return "?";
}

void KernelSpec::validate() const {
    switch (family) {
        case KernelFamily::IndicatorBall:
            if (!(eps > 0.0)) throw std::invalid_argument("indicator-ball kernel requires eps > 0");
            break;
        case KernelFamily::SymmetricGaussian:
            if (!(eps > 0.0)) {
                throw std::invalid_argument("symmetric-gaussian kernel requires eps > 0");
            }
            if (!(h > 0.0)) throw std::invalid_argument("symmetric-gaussian kernel requires h > 0");
            break;
        case KernelFamily::AsymmetricGaussian:
            if (k < 1) throw std::invalid_argument("asymmetric-gaussian kernel requires k >= 1");
            if (!(h > 0.0)) throw std::invalid_argument("asymmetric-gaussian kernel requires h > 0");
            break;
    }
}

SparseKernel kernel_matrix(const Dataset& ds, const KernelSpec& spec) {
    spec.validate();
    const NeighborGraph graph = spec.family == KernelFamily::AsymmetricGaussian
                                    ? build_knn_graph(ds, spec.k)
                                    : build_eps_graph(ds, spec.eps);
    return kernel_matrix(ds, spec, graph);
}

SparseKernel kernel_matrix(const Dataset& ds, const KernelSpec& spec, const NeighborGraph& graph) {
    spec.validate();
    const Index n = ds.size();
    if (graph.n != n) throw std::invalid_argument("kernel_matrix: graph size mismatch");
    const bool wants_knn = spec.family == KernelFamily::AsymmetricGaussian;
    if (wants_knn && (graph.mode != GraphMode::Knn || graph.k != spec.k)) {
        throw std::invalid_argument("kernel_matrix: asymmetric family needs a knn graph with matching k");
    }
    if (!wants_knn && (graph.mode != GraphMode::EpsBall || graph.eps != spec.eps)) {
        throw std::invalid_argument("kernel_matrix: ball families need an eps graph with matching eps");
    }

    const bool gaussian = spec.family != KernelFamily::IndicatorBall;
    std::vector<Eigen::Triplet<double>> triplets;
    std::size_t count = 0;
    for (const auto& list : graph.adjacency) count += list.size();
    triplets.reserve(count);

    for (Index i = 0; i < n; ++i) {
        for (const auto& nb : graph.adjacency[i]) {
            double v = 1.0;
            if (gaussian) {
                v = std::exp(-(nb.distance * nb.distance) / spec.h);
                if (v < kValueFloor) v = kValueFloor;
            }
            triplets.emplace_back(static_cast<int>(i), static_cast<int>(nb.index), v);
        }
    }

    SparseKernel kernel;
    kernel.values.resize(n, n);
    kernel.values.setFromTriplets(triplets.begin(), triplets.end());
    kernel.values.makeCompressed();
    return kernel;
}

bool is_symmetric(const SparseKernel& kmat, double tol) {
    const auto& m = kmat.values;
    for (Index i = 0; i < m.outerSize(); ++i) {
        for (SparseRowMatrix::InnerIterator it(m, i); it; ++it) {
            const double mirrored = m.coeff(it.col(), it.row());
            if (std::abs(it.value() - mirrored) > tol) return false;
        }
    }
    return true;
}

}  // namespace kdiff
