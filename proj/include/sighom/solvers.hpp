#pragma once

#include "sighom/assembly.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sighom {

struct SolverError : std::runtime_error {
    double residual = 0;
    long iterations = 0;
    SolverError(const std::string& what, double res, long iters)
        : std::runtime_error(what + " (residual " + std::to_string(res) + " after " +
                             std::to_string(iters) + " iterations)"),
          residual(res), iterations(iters) {}
};

struct CgResult {
    Vector x;
    long iterations = 0;
    double rel_residual = 0;
    bool converged = false;
};

/// Conjugate gradients with diagonal (Jacobi) preconditioner. Deterministic;
/// zero rows get a unit diagonal treatment through the caller's elimination.
inline CgResult cg_solve(const SpMat& A, const Vector& b, double rtol = 1e-12, long max_iter = -1,
                         const Vector* x0 = nullptr) {
    const long n = A.rows();
    if (max_iter < 0) max_iter = 40 * n + 200;
    Vector diag = A.diagonal();
    for (long i = 0; i < n; ++i)
        if (diag[i] <= 0) diag[i] = 1.0;

    CgResult res;
    res.x = x0 ? *x0 : Vector::Zero(n);
    double bnorm = b.norm();
    if (bnorm == 0) {
        if (!x0) {
            res.converged = true;
            return res;
        }
        bnorm = 1.0;
    }
    Vector r = b - A * res.x;
    Vector z = r.cwiseQuotient(diag);
    Vector p = z;
    double rz = r.dot(z);
    for (long it = 0; it < max_iter; ++it) {
        res.rel_residual = r.norm() / bnorm;
        if (res.rel_residual <= rtol) {
            res.converged = true;
            res.iterations = it;
            return res;
        }
        Vector Ap = A * p;
        double pAp = p.dot(Ap);
        if (pAp <= 0) break; // not SPD (or numerically exhausted)
        double a = rz / pAp;
        res.x += a * p;
        r -= a * Ap;
        z = r.cwiseQuotient(diag);
        double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
        res.iterations = it + 1;
    }
    res.rel_residual = (b - A * res.x).norm() / bnorm;
    res.converged = res.rel_residual <= rtol;
    return res;
}

/// Plain SPD solve of an eliminated system; throws on non-convergence.
inline Vector solve_linear(const DiscreteSystem& sys, double rtol = 1e-12) {
    CgResult r = cg_solve(sys.matrix(), sys.load, rtol);
    if (!r.converged)
        throw SolverError("solve_linear: conjugate gradients did not converge", r.rel_residual,
                          r.iterations);
    return r.x;
}

/// Number of connected components of the matrix adjacency graph (isolated
/// all-zero rows each count as one).
inline int matrix_graph_components(const SpMat& A) {
    const int n = int(A.rows());
    std::vector<int> parent(static_cast<size_t>(n), 0);
    for (int i = 0; i < n; ++i) parent[size_t(i)] = i;
    std::function<int(int)> find = [&](int a) {
        while (parent[size_t(a)] != a) {
            parent[size_t(a)] = parent[size_t(parent[size_t(a)])];
            a = parent[size_t(a)];
        }
        return a;
    };
    for (int k = 0; k < A.outerSize(); ++k)
        for (SpMat::InnerIterator it(A, k); it; ++it)
            if (it.value() != 0.0) {
                int ra = find(int(it.row())), rb = find(int(it.col()));
                if (ra != rb) parent[size_t(std::max(ra, rb))] = std::min(ra, rb);
            }
    int comps = 0;
    for (int i = 0; i < n; ++i)
        if (find(i) == i) ++comps;
    return comps;
}

/// Solve A x = b where A is singular exactly on constants (periodic cell
/// problems): CG on the constants-orthogonal complement, then a shift so the
/// weighted mean  sum_i w_i x_i  vanishes. `weights` must sum to 1.
inline Vector solve_with_mean_constraint(const SpMat& A, const Vector& b, const Vector& weights,
                                         double rtol = 1e-12, long max_iter = -1) {
    const long n = A.rows();
    if (matrix_graph_components(A) != 1)
        throw SolverError("solve_with_mean_constraint: singular space is not one-dimensional", 0.0, 0);
    // compatibility: constants must span the kernel, so project b
    Vector ones = Vector::Ones(n);
    double row_sum_scale = (A * ones).cwiseAbs().maxCoeff();
    double diag_scale = A.diagonal().cwiseAbs().maxCoeff();
    if (row_sum_scale > 1e-8 * std::max(diag_scale, 1.0))
        throw SolverError("solve_with_mean_constraint: kernel is not the constants", row_sum_scale, 0);
    Vector bp = b - (b.sum() / double(n)) * ones;

    if (max_iter < 0) max_iter = 40 * n + 200;
    Vector diag = A.diagonal();
    for (long i = 0; i < n; ++i)
        if (diag[i] <= 0) diag[i] = 1.0;

    Vector x = Vector::Zero(n);
    double bnorm = bp.norm();
    if (bnorm > 0) {
        Vector r = bp;
        Vector z = r.cwiseQuotient(diag);
        z -= (z.sum() / double(n)) * ones;
        Vector p = z;
        double rz = r.dot(z);
        long it = 0;
        double rel = 1.0;
        for (; it < max_iter; ++it) {
            rel = r.norm() / bnorm;
            if (rel <= rtol) break;
            Vector Ap = A * p;
            double pAp = p.dot(Ap);
            if (pAp <= 0) break;
            double a = rz / pAp;
            x += a * p;
            r -= a * Ap;
            // kill kernel drift accumulated by roundoff
            r -= (r.sum() / double(n)) * ones;
            Vector zn = r.cwiseQuotient(diag);
            zn -= (zn.sum() / double(n)) * ones;
            double rz_new = r.dot(zn);
            p = zn + (rz_new / rz) * p;
            rz = rz_new;
        }
        rel = (bp - A * x).norm() / bnorm;
        if (rel > 10 * rtol)
            throw SolverError("solve_with_mean_constraint: CG did not converge", rel, it);
    }
    x -= weights.dot(x) * ones;
    return x;
}

} // namespace sighom
