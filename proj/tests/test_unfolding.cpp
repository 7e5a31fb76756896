#include "sighom/epsilon_problem.hpp"
#include "sighom/sources.hpp"
#include "sighom/unfolding.hpp"

#include <catch2/catch.hpp>

using namespace sighom;

namespace {

EpsilonSolution solved_field(double gamma, int n, int r, double amp = 4.0) {
    ProblemSpec spec;
    spec.gamma = gamma;
    spec.n = n;
    spec.coefficient = CoefficientField::isotropic(1.0, 2.0);
    spec.interface = InterfaceCoefficient::constant(1.0);
    spec.source = make_source("sin_2pi_x_sin_pi_y", amp);
    auto mesh = build_epsilon_mesh(CellGeometry{}, n, r);
    return solve_epsilon(spec, mesh);
}

} // namespace

TEST_CASE("unfolding is the exact tiling reindex") {
    const int n = 2, r = 4;
    auto eps_mesh = build_epsilon_mesh(CellGeometry{}, n, r);
    auto cell_mesh = build_cell_mesh(CellGeometry{}, r);

    SECTION("first coordinate unfolds to eps(k1 + y1)") {
        Vector u(eps_mesh.node_count());
        for (int i = 0; i < eps_mesh.node_count(); ++i) u[i] = eps_mesh.vertices[i].x;
        for (int comp : {1, 2}) {
            auto U = unfold(u, eps_mesh, cell_mesh, comp);
            for (int k = 0; k < n * n; ++k)
                for (int l = 0; l < cell_mesh.node_count(); ++l) {
                    if (cell_mesh.node_component[l] != comp) continue;
                    double want = (k % n) * 0.5 + 0.5 * cell_mesh.vertices[size_t(l)].x;
                    CHECK(U.at(k, l) == Approx(want).margin(1e-15));
                }
        }
    }
    SECTION("constant fields unfold to constants") {
        Vector u = Vector::Constant(eps_mesh.node_count(), 3.25);
        auto U = unfold(u, eps_mesh, cell_mesh, 1);
        for (int k = 0; k < n * n; ++k)
            for (int l = 0; l < cell_mesh.node_count(); ++l)
                if (cell_mesh.node_component[l] == 1) CHECK(U.at(k, l) == 3.25);
    }
    SECTION("product rule holds exactly on nodal data") {
        Vector u(eps_mesh.node_count()), v(eps_mesh.node_count());
        for (int i = 0; i < eps_mesh.node_count(); ++i) {
            u[i] = std::sin(3.0 * eps_mesh.vertices[i].x) + 0.3;
            v[i] = eps_mesh.vertices[i].y * eps_mesh.vertices[i].y + 0.1;
        }
        auto Uu = unfold(u, eps_mesh, cell_mesh, 2);
        auto Uv = unfold(v, eps_mesh, cell_mesh, 2);
        auto Uuv = unfold(Vector(u.cwiseProduct(v)), eps_mesh, cell_mesh, 2);
        auto P = unfolded_product(Uu, Uv);
        for (size_t i = 0; i < P.samples.size(); ++i) CHECK(P.samples[i] == Uuv.samples[i]);
    }
    SECTION("mismatched meshes are rejected") {
        auto wrong_cell = build_cell_mesh(CellGeometry{}, 8);
        Vector u = Vector::Zero(eps_mesh.node_count());
        CHECK_THROWS_AS(unfold(u, eps_mesh, wrong_cell, 1), std::invalid_argument);
    }
}

TEST_CASE("integration identity and norm equality (exact tiling)") {
    const int n = 4, r = 8;
    auto eps_mesh = build_epsilon_mesh(CellGeometry{}, n, r);
    auto cell_mesh = build_cell_mesh(CellGeometry{}, r);
    Vector u(eps_mesh.node_count());
    for (int i = 0; i < eps_mesh.node_count(); ++i) {
        const Vec2& p = eps_mesh.vertices[i];
        u[i] = std::cos(5.0 * p.x) * (1.0 + p.y) + 0.2 * double(eps_mesh.node_component[i]);
    }
    for (int comp : {1, 2}) {
        auto U = unfold(u, eps_mesh, cell_mesh, comp);
        double lhs = unfolded_integral(U);
        double rhs = component_integral(eps_mesh, u, comp);
        CHECK(std::abs(lhs - rhs) <= 1e-12 * (1 + std::abs(rhs)));
        double lhs2 = unfolded_l2_sq(U);
        double rhs2 = component_l2_sq(eps_mesh, u, comp);
        CHECK(std::abs(lhs2 - rhs2) <= 1e-12 * (1 + std::abs(rhs2)));
    }
}

TEST_CASE("interface identity and inequality on a solved field") {
    auto sol = solved_field(-1.0, 4, 8);
    auto eps_mesh = build_epsilon_mesh(CellGeometry{}, 4, 8);
    auto h = InterfaceCoefficient::constant(1.0);

    SECTION("zero jump field: both sides vanish") {
        Vector zero = Vector::Zero(eps_mesh.node_count());
        auto id0 = interface_identity_check(zero, eps_mesh, h, make_source("bump"));
        CHECK(id0.lhs == 0.0);
        CHECK(id0.rhs == 0.0);
    }
    SECTION("solved field: identity at quadrature level, inequality slack") {
        auto id = interface_identity_check(sol.u, eps_mesh, h, make_source("bump"));
        CHECK(id.abs_diff <= 1e-8 * (1 + std::abs(id.lhs)));
        CHECK(id.ineq_slack >= -1e-12);
        CHECK(std::abs(id.ineq_slack) <= 1e-10 * (1 + id.lhs_sq)); // equality when no boundary layer
    }
    SECTION("unfolded jump norm equals sqrt(eps)*|[u]| on the interface") {
        double direct_sq = 0;
        for (const auto& e : eps_mesh.interface_edges) {
            const auto& A = eps_mesh.interface_pairs[size_t(e.pa)];
            const auto& B = eps_mesh.interface_pairs[size_t(e.pb)];
            double sa = sol.u[A.node1] - sol.u[A.node2];
            double sb = sol.u[B.node1] - sol.u[B.node2];
            direct_sq += e.length / 6.0 * (2 * sa * sa + 2 * sa * sb + 2 * sb * sb);
        }
        CHECK(unfolded_jump_l2(sol.u, eps_mesh) ==
              Approx(std::sqrt(0.25 * direct_sq)).epsilon(1e-12));
    }
}

TEST_CASE("weak convergence metric basics") {
    const int n = 4, r = 4;
    auto eps_mesh = build_epsilon_mesh(CellGeometry{}, n, r);
    auto homog_mesh = build_omega_mesh(16);
    SECTION("field with constant window averages c matches the limit c/theta") {
        // zero-extended averages of the value c/theta1 on component 1 equal c
        // exactly (the tiling puts the same area fraction in every window),
        // which is matched by theta1 times the constant homogenized field
        Vector ue = Vector::Constant(eps_mesh.node_count(), 2.0 / 0.75);
        Vector uh = Vector::Constant(homog_mesh.node_count(), 2.0 / 0.75);
        CHECK(weak_convergence_metric(ue, eps_mesh, 1, 0.75, uh, homog_mesh, 2) ==
              Approx(0.0).margin(1e-13));
    }
    SECTION("window that is not a multiple of eps is rejected") {
        Vector ue = Vector::Zero(eps_mesh.node_count());
        Vector uh = Vector::Zero(homog_mesh.node_count());
        CHECK_THROWS_AS(weak_convergence_metric(ue, eps_mesh, 1, 0.75, uh, homog_mesh, 3),
                        std::invalid_argument);
    }
    SECTION("zero field gives zero flux averages") {
        auto table = pullback_coefficient(CoefficientField{}, 0.25, eps_mesh);
        auto fw = window_flux_average(Vector::Zero(eps_mesh.node_count()), eps_mesh, table, 2, 2);
        CHECK(window_norm(fw) == 0.0);
    }
}
