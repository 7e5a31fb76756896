#include "sighom/cell_problems.hpp"
#include "sighom/vi.hpp"

#include <Eigen/Dense>
#include <catch2/catch.hpp>
#include <random>

using namespace sighom;

namespace {

SpMat sparse_from(const Eigen::MatrixXd& D) {
    SpMat A(D.rows(), D.cols());
    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i < D.rows(); ++i)
        for (int j = 0; j < D.cols(); ++j)
            if (D(i, j) != 0) t.emplace_back(i, j, D(i, j));
    A.setFromTriplets(t.begin(), t.end());
    return A;
}

Eigen::MatrixXd random_spd(int n, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> d;
    Eigen::MatrixXd B(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) B(i, j) = d(rng);
    return B.transpose() * B + double(n) * Eigen::MatrixXd::Identity(n, n) * 0.1;
}

Vector random_vector(int n, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> d;
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = d(rng);
    return v;
}

} // namespace

TEST_CASE("cg: identity system returns the load") {
    SpMat I = sparse_from(Eigen::MatrixXd::Identity(5, 5));
    Vector b = Vector::Unit(5, 0);
    auto r = cg_solve(I, b);
    REQUIRE(r.converged);
    CHECK((r.x - b).norm() < 1e-14);
}

TEST_CASE("cg: 2x2 hand-solvable system") {
    Eigen::MatrixXd D(2, 2);
    D << 2, -1, -1, 2;
    Vector b(2);
    b << 1, 0;
    auto r = cg_solve(sparse_from(D), b);
    REQUIRE(r.converged);
    CHECK(r.x[0] == Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(r.x[1] == Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("cg: random SPD 50x50 matches the dense factorization oracle") {
    Eigen::MatrixXd D = random_spd(50, 123);
    Vector b = random_vector(50, 321);
    auto r = cg_solve(sparse_from(D), b, 1e-14);
    REQUIRE(r.converged);
    Vector oracle = D.ldlt().solve(b);
    CHECK((r.x - oracle).norm() / oracle.norm() < 1e-10);
}

TEST_CASE("psor: separable toy problem with one bound constraint") {
    // minimize 1/2 |x|^2 - (1,-1).x subject to x2 >= 0, written with the
    // substitution x2 = dummy - u_q, dummy pinned to zero
    DiscreteVI vi;
    Eigen::MatrixXd D = Eigen::MatrixXd::Identity(3, 3);
    vi.A = sparse_from(D);
    vi.b = Vector(3);
    vi.b << 1, 1, 0;
    vi.constraint_pairs = {{2, 1}};
    vi.pinned = {2};
    auto sol = solve_vi_psor(vi);
    CHECK(sol.values[0] == Approx(1.0).margin(1e-10));
    CHECK(sol.values[1] == Approx(0.0).margin(1e-10)); // x2 = -u_q = 0
    CHECK(sol.jumps[0] == Approx(0.0).margin(1e-12));
    CHECK(sol.multipliers[0] == Approx(1.0).margin(1e-10));
    CHECK(sol.active_set == std::vector<int>{0});
}

TEST_CASE("psor without constraints agrees with the plain linear solve") {
    Eigen::MatrixXd D = random_spd(30, 5);
    Vector b = random_vector(30, 6);
    DiscreteVI vi;
    vi.A = sparse_from(D);
    vi.b = b;
    auto sol = solve_vi_psor(vi);
    Vector lin = Eigen::MatrixXd(D).ldlt().solve(b);
    CHECK((sol.values - lin).norm() / lin.norm() < 1e-10);
}

TEST_CASE("psor agrees with active-set enumeration on random instances") {
    for (unsigned seed : {1u, 2u, 3u, 4u, 5u}) {
        int n = 12;
        Eigen::MatrixXd D = random_spd(n, seed);
        Vector b = random_vector(n, seed + 100);
        DiscreteVI vi;
        vi.A = sparse_from(D);
        vi.b = b;
        vi.constraint_pairs = {{0, 1}, {2, 3}, {4, 5}, {6, 7}};
        auto psor = solve_vi_psor(vi);
        auto oracle = solve_vi_enumerate(vi);
        CHECK((psor.values - oracle.values).norm() < 1e-9 * (1 + oracle.values.norm()));
        CHECK((psor.jumps - oracle.jumps).norm() < 1e-9 * (1 + oracle.jumps.norm()));
    }
}

TEST_CASE("enumeration oracle basics") {
    SECTION("toy problem reproduces the psor answer") {
        DiscreteVI vi;
        vi.A = sparse_from(Eigen::MatrixXd::Identity(3, 3));
        vi.b = Vector(3);
        vi.b << 1, 1, 0;
        vi.constraint_pairs = {{2, 1}};
        vi.pinned = {2};
        auto sol = solve_vi_enumerate(vi);
        CHECK(sol.values[0] == Approx(1.0).margin(1e-12));
        CHECK(sol.jumps[0] == Approx(0.0).margin(1e-12));
        CHECK(sol.multipliers[0] == Approx(1.0).margin(1e-12));
    }
    SECTION("unconstrained instance selects the empty active set") {
        Eigen::MatrixXd D = random_spd(8, 17);
        // load chosen so every jump is strictly positive at the optimum
        DiscreteVI vi;
        vi.A = sparse_from(D);
        Vector x_target = Vector::Ones(8);
        x_target[1] = -1;
        x_target[3] = -2; // s = x0-x1 = 2, x2-x3 = 3
        vi.b = D * x_target;
        vi.constraint_pairs = {{0, 1}, {2, 3}};
        auto sol = solve_vi_enumerate(vi);
        CHECK(sol.active_set.empty());
        CHECK((sol.values - x_target).norm() < 1e-10);
    }
    SECTION("three-constraint instance: unique KKT point, psor agrees") {
        Eigen::MatrixXd D = random_spd(9, 23);
        Vector b = random_vector(9, 24);
        DiscreteVI vi;
        vi.A = sparse_from(D);
        vi.b = b;
        vi.constraint_pairs = {{0, 3}, {1, 4}, {2, 5}};
        auto oracle = solve_vi_enumerate(vi);
        auto psor = solve_vi_psor(vi);
        CHECK((psor.values - oracle.values).norm() < 1e-9 * (1 + oracle.values.norm()));
    }
}

TEST_CASE("psor sweeps have non-increasing objective") {
    Eigen::MatrixXd D = random_spd(20, 31);
    Vector b = random_vector(20, 32);
    DiscreteVI vi;
    vi.A = sparse_from(D);
    vi.b = b;
    vi.constraint_pairs = {{0, 1}, {2, 3}, {4, 5}, {6, 7}, {8, 9}};
    PsorOptions opt;
    opt.record_energy = true;
    auto sol = solve_vi_psor(vi, opt);
    const auto& tr = sol.diagnostics.energy_trace;
    REQUIRE(tr.size() >= 2);
    for (size_t i = 1; i < tr.size(); ++i)
        CHECK(tr[i] <= tr[i - 1] + 1e-12 * (1 + std::abs(tr[i - 1])));
}

TEST_CASE("uniqueness: two feasible starts converge to the same point") {
    Eigen::MatrixXd D = random_spd(16, 41);
    Vector b = random_vector(16, 42);
    DiscreteVI vi;
    vi.A = sparse_from(D);
    vi.b = b;
    vi.constraint_pairs = {{0, 1}, {2, 3}, {4, 5}};
    PsorOptions opt;
    opt.tol = 1e-11;
    auto a = solve_vi_psor(vi, opt);
    Vector start = 5.0 * random_vector(16, 43).cwiseAbs();
    auto c = solve_vi_psor(vi, opt, &start);
    CHECK((a.values - c.values).norm() < 10 * opt.tol * (1 + a.values.norm()) + 1e-9);
}

TEST_CASE("cone scaling: t*F scales the solution by t") {
    Eigen::MatrixXd D = random_spd(14, 51);
    Vector b = random_vector(14, 52);
    DiscreteVI vi;
    vi.A = sparse_from(D);
    vi.b = b;
    vi.constraint_pairs = {{0, 1}, {2, 3}};
    auto base = solve_vi_psor(vi);
    for (double t : {0.0, 0.5, 3.0}) {
        DiscreteVI scaled = vi;
        scaled.b = t * b;
        auto sol = solve_vi_psor(scaled);
        CHECK((sol.values - t * base.values).norm() < 1e-8 * (1 + t * base.values.norm()));
    }
}

TEST_CASE("mean-constrained solve on the periodic Laplacian") {
    auto mesh = build_cell_mesh(CellGeometry::without_inclusion(), 4);
    std::vector<std::pair<int, int>> pp;
    for (const auto& p : mesh.periodic_pairs) pp.emplace_back(p.a, p.b);
    auto dofs = DofMap::merged(mesh.node_count(), pp, [](int) { return true; });
    auto table = pullback_coefficient(CoefficientField{}, 1.0, mesh);
    SpMat K = assemble_stiffness(mesh, table, dofs);
    Vector w = Vector::Constant(dofs.ndof, 1.0 / dofs.ndof);

    SECTION("zero load gives the zero solution") {
        Vector x = solve_with_mean_constraint(K, Vector::Zero(dofs.ndof), w);
        CHECK(x.norm() == 0.0);
    }
    SECTION("normalization is idempotent under constant shifts") {
        Vector b = random_vector(dofs.ndof, 77);
        b.array() -= b.mean();
        Vector x = solve_with_mean_constraint(K, b, w);
        Vector y = x + 3.25 * Vector::Ones(dofs.ndof);
        y -= w.dot(y) * Vector::Ones(dofs.ndof);
        CHECK((x - y).norm() < 1e-12 * (1 + x.norm()));
    }
    SECTION("matches the dense pseudo-inverse oracle") {
        Vector b = random_vector(dofs.ndof, 78);
        b.array() -= b.mean();
        Vector x = solve_with_mean_constraint(K, b, w);
        Eigen::MatrixXd Kd(K);
        Vector oracle = Kd.completeOrthogonalDecomposition().pseudoInverse() * b;
        oracle -= w.dot(oracle) * Vector::Ones(dofs.ndof);
        CHECK((x - oracle).norm() < 1e-10 * (1 + oracle.norm()));
    }
    SECTION("two-component kernel is reported") {
        // block-diagonal singular system: two disconnected periodic meshes
        SpMat K2(2 * dofs.ndof, 2 * dofs.ndof);
        std::vector<Eigen::Triplet<double>> t;
        for (int k = 0; k < K.outerSize(); ++k)
            for (SpMat::InnerIterator it(K, k); it; ++it) {
                t.emplace_back(int(it.row()), int(it.col()), it.value());
                t.emplace_back(int(it.row()) + dofs.ndof, int(it.col()) + dofs.ndof, it.value());
            }
        K2.setFromTriplets(t.begin(), t.end());
        CHECK_THROWS_AS(
            solve_with_mean_constraint(K2, Vector::Zero(2 * dofs.ndof),
                                       Vector::Constant(2 * dofs.ndof, 0.5 / dofs.ndof)),
            SolverError);
    }
}
