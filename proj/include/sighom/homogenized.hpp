#pragma once

#include "sighom/cell_problems.hpp"

#include <Eigen/SparseCholesky>
#include <optional>

namespace sighom {

struct HomogenizedSolution {
    Vector u1;
    std::optional<Vector> u2; // gamma = 1 only: the second temperature field
    std::string regime;
    long iterations = 0;
    std::vector<double> energy_trace; // nonlinear solve diagnostics
};

namespace detail {

inline std::vector<Eigen::Matrix2d> constant_table(const TwoComponentMesh& m, const Eigen::Matrix2d& A) {
    return std::vector<Eigen::Matrix2d>(size_t(m.triangle_count()), A);
}

inline std::vector<std::uint8_t> dirichlet_mask(const TwoComponentMesh& m) {
    std::vector<std::uint8_t> mask(size_t(m.node_count()), 0);
    for (int b : m.boundary_nodes) mask[size_t(b)] = 1;
    return mask;
}

} // namespace detail

/// -div(A0 grad u1) = f in Omega, u1 = 0 on the boundary. The right-hand
/// side is the full f (not theta1 f).
inline HomogenizedSolution solve_linear_homogenized(const EffectiveTensor& tensor, const SourceFn& f,
                                                    const TwoComponentMesh& mesh, double cg_rtol = 1e-12) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(tensor.matrix);
    if (es.eigenvalues()(0) <= 0)
        throw std::invalid_argument("solve_linear_homogenized: tensor must be positive definite");
    auto dofs = DofMap::identity(mesh.node_count());
    SpMat K = assemble_stiffness(mesh, detail::constant_table(mesh, tensor.matrix), dofs);
    Vector F = assemble_load(mesh, f, dofs);
    auto mask = detail::dirichlet_mask(mesh);
    eliminate_dirichlet(K, F, mask);
    CgResult r = cg_solve(K, F, cg_rtol);
    if (!r.converged)
        throw SolverError("solve_linear_homogenized: CG did not converge", r.rel_residual, r.iterations);
    HomogenizedSolution sol;
    sol.u1 = r.x;
    sol.regime = tensor.regime;
    sol.iterations = r.iterations;
    return sol;
}

struct NonlinearOptions {
    double residual_tol = 1e-6;   // |g| <= tol * |F|
    double energy_tol = 1e-10;    // relative energy decrease
    long max_iterations = 500;
    double armijo = 1e-4;
};

/// gamma = -1 limit: minimize the convex energy sum_T |T| W(grad u|_T) - F u
/// over the P1 Dirichlet space, W(zeta) = 1/2 zeta . A0_{-1}(zeta). Descent
/// directions are preconditioned gradients (fixed SPD stiffness from the
/// map's secant tensor), with a two-point initial step and Armijo backtracking.
inline HomogenizedSolution solve_nonlinear_homogenized(const EffectiveMap& map, const SourceFn& f,
                                                       const TwoComponentMesh& mesh,
                                                       const NonlinearOptions& opt = {}) {
    auto dofs = DofMap::identity(mesh.node_count());
    auto mask = detail::dirichlet_mask(mesh);
    Vector F = assemble_load(mesh, f, dofs);
    for (int i = 0; i < F.size(); ++i)
        if (mask[size_t(i)]) F[i] = 0;

    // secant tensor of the map at the coordinate directions, symmetrized
    Eigen::Matrix2d Apre;
    Apre.col(0) = map(Eigen::Vector2d::UnitX());
    Apre.col(1) = map(Eigen::Vector2d::UnitY());
    Apre = (0.5 * (Apre + Apre.transpose())).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(Apre);
    if (es.eigenvalues()(0) <= 0)
        throw SolverError("solve_nonlinear_homogenized: map secant is not positive definite",
                          es.eigenvalues()(0), 0);
    SpMat K0 = assemble_stiffness(mesh, detail::constant_table(mesh, Apre), dofs);
    Vector dummy = Vector::Zero(F.size());
    eliminate_dirichlet(K0, dummy, mask);
    Eigen::SimplicialLDLT<SpMat> K0f(K0);
    if (K0f.info() != Eigen::Success)
        throw SolverError("solve_nonlinear_homogenized: preconditioner factorization failed", 0, 0);

    auto energy = [&](const Vector& u) {
        double e = 0;
        for (int t = 0; t < mesh.triangle_count(); ++t)
            e += mesh.triangle_area(t) * map.potential(triangle_gradient(mesh, t, u));
        return e - F.dot(u);
    };
    auto gradient = [&](const Vector& u) {
        Vector g = -F;
        for (int t = 0; t < mesh.triangle_count(); ++t) {
            double area;
            auto grad = p1_gradients(mesh, t, area);
            Eigen::Vector2d q = map(triangle_gradient(mesh, t, u));
            for (int i = 0; i < 3; ++i) g[mesh.triangles[t].v[i]] += area * q.dot(grad[i]);
        }
        for (int i = 0; i < g.size(); ++i)
            if (mask[size_t(i)]) g[i] = 0;
        return g;
    };

    const double F_norm = std::max(F.norm(), 1e-300);
    Vector u = Vector::Zero(mesh.node_count());
    Vector g = gradient(u);
    double E = energy(u);
    HomogenizedSolution sol;
    sol.regime = "vi";
    sol.energy_trace.push_back(E);

    Vector u_prev = u, g_prev = g;
    double step = 1.0;
    long it = 0;
    for (; it < opt.max_iterations; ++it) {
        double res = g.norm() / F_norm;
        double dE_rel = it == 0 ? 1.0
                                : std::abs(sol.energy_trace[size_t(it) - 1] - E) /
                                      std::max(std::abs(E), 1e-300);
        if (res <= opt.residual_tol && (it > 0 && dE_rel <= opt.energy_tol)) break;
        if (res <= 0.01 * opt.residual_tol) break;

        Vector d = -K0f.solve(g);
        double gd = g.dot(d);
        if (gd >= 0)
            throw SolverError("solve_nonlinear_homogenized: lost descent direction", res, it);

        // two-point step heuristic in the K0 metric
        if (it > 0) {
            Vector s = u - u_prev, y = g - g_prev;
            double sy = s.dot(y);
            if (sy > 0) step = std::clamp(s.dot(K0 * s) / sy, 0.25, 4.0);
            else step = 1.0;
        }
        u_prev = u;
        g_prev = g;
        double t = step;
        double E_new = energy(u + t * d);
        int backtracks = 0;
        while (E_new > E + opt.armijo * t * gd && backtracks < 60) {
            t *= 0.5;
            E_new = energy(u + t * d);
            ++backtracks;
        }
        if (E_new > E) {
            // stagnation: accept only if the residual criterion already holds
            if (res <= opt.residual_tol) break;
            throw SolverError("solve_nonlinear_homogenized: no descent step found", res, it);
        }
        u += t * d;
        E = E_new;
        g = gradient(u);
        sol.energy_trace.push_back(E);
    }
    double res = g.norm() / F_norm;
    if (res > opt.residual_tol)
        throw SolverError("solve_nonlinear_homogenized: residual tolerance not reached", res, it);
    sol.u1 = u;
    sol.iterations = it;
    return sol;
}

/// gamma = 1 limit: the obstacle problem over K = { phi1 >= phi2 } with
///   int A0_1 grad u1 . grad(phi1-u1) + c int (u1-u2)((phi1-phi2)-(u1-u2))
///     >= theta1 int f (phi1-u1) + theta2 int f (phi2-u2),
/// where c = int_Gamma h dsigma / |Y| (the unfolded interface coefficient).
/// Unknown layout: [u1 nodes | u2 nodes], constraint u1_i - u2_i >= 0 at
/// every node, u2 in L2 discretized with P1 nodal values.
inline HomogenizedSolution solve_obstacle_homogenized(const EffectiveTensor& A01, double c,
                                                      double theta1, double theta2, const SourceFn& f,
                                                      const TwoComponentMesh& mesh,
                                                      const PsorOptions& psor = {}) {
    if (c <= 0) throw std::invalid_argument("solve_obstacle_homogenized: coefficient c must be positive");
    const int N = mesh.node_count();
    auto dofs = DofMap::identity(N);
    SpMat K = assemble_stiffness(mesh, detail::constant_table(mesh, A01.matrix), dofs);
    SpMat M = assemble_mass(mesh, dofs);
    Vector F = assemble_load(mesh, f, dofs);

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(size_t(K.nonZeros()) + 4 * size_t(M.nonZeros()));
    for (int k = 0; k < K.outerSize(); ++k)
        for (SpMat::InnerIterator it(K, k); it; ++it)
            trips.emplace_back(int(it.row()), int(it.col()), it.value());
    for (int k = 0; k < M.outerSize(); ++k)
        for (SpMat::InnerIterator it(M, k); it; ++it) {
            int i = int(it.row()), j = int(it.col());
            double v = c * it.value();
            trips.emplace_back(i, j, v);
            trips.emplace_back(i, N + j, -v);
            trips.emplace_back(N + i, j, -v);
            trips.emplace_back(N + i, N + j, v);
        }
    DiscreteVI vi;
    vi.A.resize(2 * N, 2 * N);
    vi.A.setFromTriplets(trips.begin(), trips.end());
    vi.b.resize(2 * N);
    vi.b.head(N) = theta1 * F;
    vi.b.tail(N) = theta2 * F;
    for (int b : mesh.boundary_nodes) vi.pinned.push_back(b);
    for (int i = 0; i < N; ++i) vi.constraint_pairs.emplace_back(i, N + i);

    VISolution vs = solve_vi_psor(vi, psor);
    HomogenizedSolution sol;
    sol.regime = "obstacle";
    sol.u1 = vs.values.head(N);
    sol.u2 = Vector(vs.values.tail(N));
    sol.iterations = vs.diagnostics.sweeps;
    return sol;
}

} // namespace sighom
