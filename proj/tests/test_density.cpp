#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kdiff/dataset.hpp"
#include "kdiff/density.hpp"
#include "kdiff/kernels.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace kdiff;

namespace {

Dataset random_dataset(Index n, Index d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Dataset ds;
    ds.points.resize(n, d);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < d; ++j) ds.points(i, j) = unif(rng);
    return ds;
}

TransitionMatrix transition_from_dense(const Matrix& dense) {
    SparseKernel kernel;
    kernel.values = dense.sparseView();
    kernel.values.makeCompressed();
    return build_transition(kernel);
}

// Random ergodic chain: strictly positive kernel entries on a ring plus
// random extras, self-loops included.
TransitionMatrix random_ergodic_chain(Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.1, 1.0);
    std::uniform_int_distribution<Index> pick(0, n - 1);
    Matrix dense = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
        dense(i, i) = unif(rng);
        dense(i, (i + 1) % n) = unif(rng);
        for (int extra = 0; extra < 3; ++extra) dense(i, pick(rng)) = unif(rng);
    }
    return transition_from_dense(dense);
}

Vector left_apply(const TransitionMatrix& P, const Vector& pi) {
    Vector out = Vector::Zero(P.size());
    for (Index i = 0; i < P.size(); ++i) {
        for (SparseRowMatrix::InnerIterator it(P.probs, i); it; ++it) {
            out[it.col()] += pi[i] * it.value();
        }
    }
    return out;
}

}  // namespace

TEST_CASE("unit ball volume: exact low-dimensional values") {
    CHECK(unit_ball_volume(0) == doctest::Approx(1.0));
    CHECK(unit_ball_volume(1) == doctest::Approx(2.0));
    CHECK(unit_ball_volume(2) == doctest::Approx(M_PI));
    CHECK(unit_ball_volume(3) == doctest::Approx(4.0 * M_PI / 3.0));
    CHECK(unit_ball_volume(4) == doctest::Approx(M_PI * M_PI / 2.0));
    CHECK(unit_ball_volume(5) == doctest::Approx(8.0 * M_PI * M_PI / 15.0));
}

TEST_CASE("naive density: collinear hand example") {
    Dataset ds;
    ds.points.resize(3, 1);
    ds.points << 0.0, 1.0, 2.0;
    const auto rho = density_naive(ds, 1.5);
    // counts [2,3,2] over n eps^d V_d = 3 * 1.5 * 2 = 9
    CHECK(rho.values[0] == doctest::Approx(2.0 / 9.0).epsilon(1e-14));
    CHECK(rho.values[1] == doctest::Approx(3.0 / 9.0).epsilon(1e-14));
    CHECK(rho.values[2] == doctest::Approx(2.0 / 9.0).epsilon(1e-14));
    CHECK(rho.kind == DensityKind::Naive);
}

TEST_CASE("naive density: isolation and single point") {
    const auto ds = random_dataset(10, 2, 1);
    const double eps = 1e-6;
    const auto rho = density_naive(ds, eps);
    const double expected = 1.0 / (10.0 * eps * eps * unit_ball_volume(2));
    for (Index i = 0; i < 10; ++i) CHECK(rho.values[i] == doctest::Approx(expected));

    Dataset one;
    one.points.resize(1, 3);
    one.points << 0.0, 0.0, 0.0;
    const auto single = density_naive(one, 2.0);
    CHECK(single.values[0] == doctest::Approx(1.0 / (std::pow(2.0, 3) * unit_ball_volume(3))));
}

TEST_CASE("local contrast: ties, dominance, collinear example") {
    Dataset ds;
    ds.points.resize(3, 1);
    ds.points << 0.0, 1.0, 2.0;
    const auto knn = build_knn_graph(ds, 2);

    DensityVector flat;
    flat.kind = DensityKind::Naive;
    flat.values = Vector::Constant(3, 0.5);
    const auto lc_flat = density_lc(flat, knn);
    CHECK(lc_flat.values.cwiseAbs().maxCoeff() == 0.0);  // strict inequality never holds

    const auto rho = density_naive(ds, 1.5);  // [2/9, 3/9, 2/9]
    const auto lc = density_lc(rho, knn);
    CHECK(lc.values[0] == 0.0);
    CHECK(lc.values[1] == doctest::Approx(2.0 / 3.0));
    CHECK(lc.values[2] == 0.0);
    CHECK(lc.kind == DensityKind::LocalContrast);
}

TEST_CASE("local contrast: unique maximum with k = n-1 reaches (n-1)/n") {
    const Index n = 9;
    auto ds = random_dataset(n, 2, 2);
    const auto knn = build_knn_graph(ds, static_cast<int>(n - 1));
    DensityVector rho;
    rho.kind = DensityKind::Naive;
    rho.values = Vector::LinSpaced(n, 1.0, 2.0);  // unique max at the last point
    const auto lc = density_lc(rho, knn);
    CHECK(lc.values[n - 1] == doctest::Approx((n - 1.0) / n));
}

TEST_CASE("transition: two-point symmetric kernel") {
    Matrix dense(2, 2);
    const double a = 0.25;
    dense << 1.0, a, a, 1.0;
    const auto P = transition_from_dense(dense);
    CHECK(P.probs.coeff(0, 0) == doctest::Approx(1.0 / 1.25));
    CHECK(P.probs.coeff(0, 1) == doctest::Approx(0.25 / 1.25));
    CHECK(P.degrees[0] == doctest::Approx(1.25));
}

TEST_CASE("transition: diagonal kernel gives the identity chain") {
    const auto P = transition_from_dense(Matrix::Identity(4, 4));
    for (Index i = 0; i < 4; ++i) CHECK(P.probs.coeff(i, i) == 1.0);
    CHECK(P.nonzeros() == 4);
}

TEST_CASE("transition: conservation on random kernels") {
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto ds = random_dataset(60, 2, seed);
        KernelSpec spec;
        spec.family = KernelFamily::SymmetricGaussian;
        spec.eps = 0.8;
        const auto P = build_transition(kernel_matrix(ds, spec));
        for (Index i = 0; i < P.size(); ++i) {
            double row = 0.0;
            for (SparseRowMatrix::InnerIterator it(P.probs, i); it; ++it) row += it.value();
            CHECK(std::abs(row - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("transition: empty kernel row is rejected") {
    Matrix dense = Matrix::Zero(3, 3);
    dense(0, 0) = 1.0;
    dense(1, 1) = 1.0;  // row 2 empty
    SparseKernel kernel;
    kernel.values = dense.sparseView();
    CHECK_THROWS_WITH_AS(build_transition(kernel), doctest::Contains("zero-degree"),
                         std::invalid_argument);
}

TEST_CASE("kd: doubly stochastic 2x2 gives the uniform distribution") {
    Matrix dense(2, 2);
    dense << 0.5, 0.5, 0.5, 0.5;
    const auto pi = density_kd(transition_from_dense(dense));
    CHECK(pi.values[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(pi.values[1] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(pi.kind == DensityKind::Kd);
}

TEST_CASE("kd: reversible chains match degree normalization") {
    const auto ds = random_dataset(80, 2, 17);
    KernelSpec spec;
    spec.family = KernelFamily::SymmetricGaussian;
    spec.eps = 2.0;  // large: connected
    const auto P = build_transition(kernel_matrix(ds, spec));

    PowerIterationOptions opts;
    opts.tol = 1e-12;
    opts.max_iter = 100000;
    const auto pi = density_kd(P, opts);

    const Vector expected = P.degrees / P.degrees.sum();
    CHECK((pi.values - expected).cwiseAbs().maxCoeff() < 1e-10);

    // stationarity of the returned vector
    CHECK((left_apply(P, pi.values) - pi.values).lpNorm<1>() <= opts.tol);
    CHECK(pi.values.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("kd: period-2 chain raises with a periodicity diagnosis") {
    Matrix dense(2, 2);
    dense << 0.0, 1.0, 1.0, 0.0;
    CHECK_THROWS_WITH_AS(density_kd(transition_from_dense(dense)),
                         doctest::Contains("periodic"), ConvergenceError);
}

TEST_CASE("kd: reducible chain raises with a reducibility diagnosis") {
    CHECK_THROWS_WITH_AS(density_kd(transition_from_dense(Matrix::Identity(3, 3))),
                         doctest::Contains("reducible"), ConvergenceError);
}

TEST_CASE("kd: damping reported in params and fixes the periodic chain") {
    Matrix dense(2, 2);
    dense << 0.0, 1.0, 1.0, 0.0;
    PowerIterationOptions opts;
    opts.damping = 1e-3;
    const auto pi = density_kd(transition_from_dense(dense), opts);
    CHECK(pi.params.at("damping") == 1e-3);
    CHECK(pi.values[0] == doctest::Approx(0.5).epsilon(1e-9));

    const auto plain = density_kd(transition_from_dense(Matrix::Constant(2, 2, 0.5)));
    CHECK(plain.params.count("damping") == 0);
}

TEST_CASE("stationary_exact: hand-solved 2x2 chain") {
    Matrix dense(2, 2);
    dense << 0.5, 0.5, 0.25, 0.75;
    const auto pi = stationary_exact(transition_from_dense(dense));
    CHECK(pi.values[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(pi.values[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("stationary_exact: identity chain is reducible") {
    CHECK_THROWS_WITH_AS(stationary_exact(transition_from_dense(Matrix::Identity(3, 3))),
                         doctest::Contains("reducible"), ConvergenceError);
}

TEST_CASE("stationary_exact agrees with power iteration on random ergodic chains") {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const Index n = 20 + static_cast<Index>(seed) * 25;  // up to 195
        const auto P = random_ergodic_chain(n, seed);
        PowerIterationOptions opts;
        opts.tol = 1e-12;
        opts.max_iter = 200000;
        const auto iterated = density_kd(P, opts);
        const auto exact = stationary_exact(P);
        CHECK((iterated.values - exact.values).cwiseAbs().maxCoeff() < 10.0 * opts.tol);
    }
}

TEST_CASE("fkd: column sums, hand example and identity chain") {
    Matrix dense(2, 2);
    dense << 0.5, 0.5, 0.25, 0.75;
    SparseKernel kernel;
    kernel.values = dense.sparseView();
    TransitionMatrix P;  // already stochastic: use rows as-is
    P.probs = kernel.values;
    P.degrees = Vector::Ones(2);
    const auto fkd = density_fkd(P);
    CHECK(fkd.values[0] == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(fkd.values[1] == doctest::Approx(1.25).epsilon(1e-15));
    CHECK(fkd.kind == DensityKind::Fkd);

    const auto eye = density_fkd(transition_from_dense(Matrix::Identity(5, 5)));
    for (Index i = 0; i < 5; ++i) CHECK(eye.values[i] == 1.0);
}

TEST_CASE("fkd: values sum to n") {
    for (std::uint64_t seed : {2, 4}) {
        const auto P = random_ergodic_chain(150, seed);
        const auto fkd = density_fkd(P);
        CHECK(std::abs(fkd.values.sum() - 150.0) <= 1e-9 * 150.0);
    }
}

TEST_CASE("fkd: indicator-kernel identity with the naive density") {
    // column-sum FKD(x) == (1/C_d) sum_{y in B(x,eps)} 1/rho_naive(y),
    // C_d = n eps^d V_d, both sides computed independently.
    for (std::uint64_t seed : {0, 1, 2, 3}) {
        const auto ds = random_dataset(120, 2, seed);
        const double eps = 0.5;
        KernelSpec spec;
        spec.family = KernelFamily::IndicatorBall;
        spec.eps = eps;
        const auto fkd = density_fkd(build_transition(kernel_matrix(ds, spec)));

        const auto graph = build_eps_graph(ds, eps);
        const auto naive = density_naive(graph, 2);
        const double c_d = 120.0 * eps * eps * unit_ball_volume(2);
        for (Index i = 0; i < 120; ++i) {
            double rhs = 0.0;
            for (const auto& nb : graph.adjacency[i]) rhs += 1.0 / naive.values[nb.index];
            rhs /= c_d;
            CHECK(fkd.values[i] == doctest::Approx(rhs).epsilon(1e-10));
        }
    }
}

TEST_CASE("fkd cluster means: disjoint clusters give exactly 1") {
    // Three clouds of sizes 10/50/200 with gaps far beyond eps.
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    const std::vector<Index> sizes = {10, 50, 200};
    Dataset ds;
    ds.points.resize(260, 2);
    std::vector<int> labels;
    Index row = 0;
    for (std::size_t c = 0; c < sizes.size(); ++c) {
        for (Index t = 0; t < sizes[c]; ++t, ++row) {
            ds.points(row, 0) = 100.0 * static_cast<double>(c) + unif(rng);
            ds.points(row, 1) = unif(rng);
            labels.push_back(static_cast<int>(c));
        }
    }
    KernelSpec spec;
    spec.family = KernelFamily::IndicatorBall;
    spec.eps = 3.0;  // < 100 gap
    const auto fkd = density_fkd(build_transition(kernel_matrix(ds, spec)));
    const auto means = fkd_cluster_mean(fkd, labels);
    REQUIRE(means.size() == 3);
    for (Index c = 0; c < 3; ++c) CHECK(std::abs(means[c] - 1.0) <= 1e-12);

    // one cluster covering everything: mean 1 as well
    const auto one = fkd_cluster_mean(fkd, std::vector<int>(260, 0));
    CHECK(std::abs(one[0] - 1.0) <= 1e-12);
}

TEST_CASE("fkd cluster means: size mismatch and gaps rejected") {
    DensityVector fkd;
    fkd.kind = DensityKind::Fkd;
    fkd.values = Vector::Ones(4);
    CHECK_THROWS_AS(fkd_cluster_mean(fkd, {0, 1}), std::invalid_argument);
    CHECK_THROWS_AS(fkd_cluster_mean(fkd, {0, 0, 2, 2}), std::invalid_argument);  // id 1 missing
}

TEST_CASE("scale freedom: kernel scaling leaves P, kd, fkd unchanged") {
    const auto ds = random_dataset(70, 2, 21);
    KernelSpec spec;
    spec.family = KernelFamily::SymmetricGaussian;
    spec.eps = 1.5;
    auto kernel = kernel_matrix(ds, spec);
    SparseKernel scaled;
    scaled.values = kernel.values * 37.5;

    const auto P1 = build_transition(kernel);
    const auto P2 = build_transition(scaled);
    CHECK((Matrix(P1.probs) - Matrix(P2.probs)).cwiseAbs().maxCoeff() <= 1e-12);

    const auto kd1 = density_kd(P1);
    const auto kd2 = density_kd(P2);
    CHECK((kd1.values - kd2.values).cwiseAbs().maxCoeff() <= 1e-12);

    const auto f1 = density_fkd(P1);
    const auto f2 = density_fkd(P2);
    CHECK((f1.values - f2.values).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("sum_normalized marks fkd vectors and preserves proportions") {
    const auto P = random_ergodic_chain(40, 9);
    const auto fkd = density_fkd(P);
    const auto norm = sum_normalized(fkd);
    CHECK(norm.kind == DensityKind::FkdNormalized);
    CHECK(norm.values.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(norm.values[7] / norm.values[3] == doctest::Approx(fkd.values[7] / fkd.values[3]));
}

TEST_CASE("density csv export") {
    DensityVector dv;
    dv.kind = DensityKind::Naive;
    dv.values = Vector::LinSpaced(3, 0.25, 0.75);
    std::ostringstream out;
    write_density_csv(out, dv);
    CHECK(out.str() ==
          "index,value,kind\n0,0.25,naive\n1,0.5,naive\n2,0.75,naive\n");
}
