#include "sighom/homogenized.hpp"
#include "sighom/sources.hpp"

#include <catch2/catch.hpp>

using namespace sighom;

namespace {

double l2_error_vs(const TwoComponentMesh& mesh, const Vector& u,
                   const std::function<double(double, double)>& exact) {
    // degree-2 edge-midpoint rule per triangle
    double err = 0;
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const auto& tr = mesh.triangles[t];
        Vec2 p[3] = {mesh.vertices[tr.v[0]], mesh.vertices[tr.v[1]], mesh.vertices[tr.v[2]]};
        double uv[3] = {u[tr.v[0]], u[tr.v[1]], u[tr.v[2]]};
        double area = mesh.triangle_area(t);
        for (int e = 0; e < 3; ++e) {
            int a = e, b = (e + 1) % 3;
            double mx = 0.5 * (p[a].x + p[b].x), my = 0.5 * (p[a].y + p[b].y);
            double uh = 0.5 * (uv[a] + uv[b]);
            double d = uh - exact(mx, my);
            err += area / 3.0 * d * d;
        }
    }
    return std::sqrt(err);
}

double l2_norm_nodal(const TwoComponentMesh& mesh, const Vector& v) {
    auto dofs = DofMap::identity(mesh.node_count());
    SpMat M = assemble_mass(mesh, dofs);
    return std::sqrt(v.dot(M * v));
}

} // namespace

TEST_CASE("linear homogenized solve") {
    EffectiveTensor I{Eigen::Matrix2d::Identity(), "whole"};
    SECTION("zero source gives zero") {
        auto mesh = build_omega_mesh(16);
        auto sol = solve_linear_homogenized(I, make_source("zero"), mesh);
        CHECK(sol.u1.cwiseAbs().maxCoeff() < 1e-14);
    }
    SECTION("manufactured solution converges at second order") {
        constexpr double pi = 3.14159265358979323846;
        auto exact = [pi](double x, double y) { return std::sin(pi * x) * std::sin(pi * y); };
        double prev = 0;
        std::vector<double> errs;
        for (int res : {8, 16, 32}) {
            auto mesh = build_omega_mesh(res);
            auto sol = solve_linear_homogenized(I, make_source("manufactured_pi"), mesh);
            errs.push_back(l2_error_vs(mesh, sol.u1, exact));
        }
        CHECK(errs[0] / errs[1] == Approx(4.0).margin(0.7));
        CHECK(errs[1] / errs[2] == Approx(4.0).margin(0.5));
        (void)prev;
    }
    SECTION("scaling the tensor scales the solution inversely") {
        auto mesh = build_omega_mesh(16);
        auto f = make_source("sin_2pi_x_sin_pi_y", 1.0);
        auto sol1 = solve_linear_homogenized(I, f, mesh);
        EffectiveTensor aI{3.0 * Eigen::Matrix2d::Identity(), "whole"};
        auto sol3 = solve_linear_homogenized(aI, f, mesh);
        CHECK((sol3.u1 - sol1.u1 / 3.0).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("nonlinear homogenized solve") {
    auto mesh = build_omega_mesh(16);
    SECTION("zero source gives zero") {
        auto map = EffectiveMap::from_tensor(Eigen::Matrix2d::Identity());
        auto sol = solve_nonlinear_homogenized(map, make_source("zero"), mesh);
        CHECK(sol.u1.cwiseAbs().maxCoeff() < 1e-12);
    }
    SECTION("a linear tensor map reproduces the linear solve") {
        Eigen::Matrix2d A;
        A << 1.3, 0.2, 0.2, 0.9;
        auto f = make_source("sin_2pi_x_sin_pi_y", 2.0);
        auto lin = solve_linear_homogenized({A, "perforated"}, f, mesh);
        auto non = solve_nonlinear_homogenized(EffectiveMap::from_tensor(A), f, mesh);
        CHECK((non.u1 - lin.u1).cwiseAbs().maxCoeff() < 1e-6 * (1 + lin.u1.cwiseAbs().maxCoeff()));
    }
    SECTION("positive homogeneity in the source, and decreasing energy trace") {
        Eigen::Matrix2d A;
        A << 1.0, 0.1, 0.1, 1.5;
        auto map = EffectiveMap::from_tensor(A);
        auto base = solve_nonlinear_homogenized(map, make_source("sin_pi_xy", 1.0), mesh);
        for (size_t i = 1; i < base.energy_trace.size(); ++i)
            CHECK(base.energy_trace[i] <= base.energy_trace[i - 1] + 1e-15);
        for (double t : {0.5, 4.0}) {
            auto scaled = solve_nonlinear_homogenized(map, make_source("sin_pi_xy", t), mesh);
            CHECK((scaled.u1 - t * base.u1).cwiseAbs().maxCoeff() <
                  2e-6 * (1 + t * base.u1.cwiseAbs().maxCoeff()));
        }
    }
}

TEST_CASE("obstacle homogenized solve against the complementarity elimination") {
    // Coupled VI over { phi1 >= phi2 }. Oracle, derived by pointwise
    // elimination and cross-checked against the eps-problem limit: u1 solves
    // the plain Dirichlet problem with the full source, and the gap satisfies
    // s = (theta2/c) max(-f, 0) with c the unfolded interface coefficient.
    EffectiveTensor A01{0.6 * Eigen::Matrix2d::Identity(), "perforated"};
    const double c = 2.0; // e.g. h = 1 on the default inclusion: int_Gamma h / |Y|
    const double theta1 = 0.75, theta2 = 0.25;

    SECTION("zero source gives zero fields") {
        auto mesh = build_omega_mesh(8);
        auto sol = solve_obstacle_homogenized(A01, c, theta1, theta2, make_source("zero"), mesh);
        CHECK(sol.u1.cwiseAbs().maxCoeff() < 1e-14);
        CHECK(sol.u2->cwiseAbs().maxCoeff() < 1e-14);
    }
    SECTION("constant negative source: uniform gap, u1 decouples") {
        auto mesh = build_omega_mesh(16);
        auto f = make_source("constant", -1.0);
        auto sol = solve_obstacle_homogenized(A01, c, theta1, theta2, f, mesh);
        auto lin = solve_linear_homogenized(A01, f, mesh);
        CHECK((sol.u1 - lin.u1).cwiseAbs().maxCoeff() < 1e-9);
        Vector gap = sol.u1 - *sol.u2;
        CHECK((gap.array() - theta2 / c).abs().maxCoeff() < 1e-9);
    }
    SECTION("sign-changing source: active set tracks {f >= 0} within a layer") {
        const int res = 32;
        auto mesh = build_omega_mesh(res);
        auto f = make_source("sin_2pi_x", 1.0);
        auto sol = solve_obstacle_homogenized(A01, c, theta1, theta2, f, mesh);
        Vector gap = sol.u1 - *sol.u2;
        double h = 1.0 / res;
        for (int i = 0; i < mesh.node_count(); ++i) {
            double x = mesh.vertices[i].x;
            bool active = gap[i] <= 1e-9;
            // f = sin(2 pi x) >= 0 on [0, 1/2]
            if (x < 0.5 - h) CHECK(active);
            if (x > 0.5 + h && x < 1.0 - 1e-12) CHECK(!active);
        }
        // nodal complementarity of the consistent-mass system, scaled
        auto dofs = DofMap::identity(mesh.node_count());
        SpMat M = assemble_mass(mesh, dofs);
        Vector F = assemble_load(mesh, f, dofs);
        Vector resid = c * (M * gap) - theta2 * F; // = -multiplier
        double scale = theta2 * F.cwiseAbs().maxCoeff();
        for (int i = 0; i < mesh.node_count(); ++i)
            CHECK(std::min(gap[i], -resid[i] / scale) < 1e-8);
    }
}

TEST_CASE("stability: discrete max of u1 bounded by C |f|_inf across refinements") {
    EffectiveTensor T{0.55 * Eigen::Matrix2d::Identity(), "perforated"};
    for (int res : {8, 16, 32}) {
        auto mesh = build_omega_mesh(res);
        auto sol = solve_linear_homogenized(T, make_source("sin_2pi_x_sin_pi_y", 5.0), mesh);
        CHECK(sol.u1.cwiseAbs().maxCoeff() <= 1.0 * 5.0);
    }
}
