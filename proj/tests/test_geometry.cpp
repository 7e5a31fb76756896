#include "sighom/geometry.hpp"
#include "sighom/mesh.hpp"

#include <catch2/catch.hpp>
#include <fstream>
#include <set>
#include <sstream>

using namespace sighom;

TEST_CASE("cell geometry validation and derived quantities") {
    CellGeometry g; // default (0.25,0.75)^2 inclusion
    g.validate();
    CHECK(g.theta2() == Approx(0.25).margin(0));
    CHECK(g.theta1() + g.theta2() == Approx(1.0).margin(0));
    CHECK(g.interface_perimeter() == Approx(2.0));
    CHECK(g.corner_denominator_lcm() == 4);

    CellGeometry bad = g;
    bad.x1 = Frac(5, 4);
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    CellGeometry none = CellGeometry::without_inclusion();
    none.validate();
    CHECK(none.theta2() == 0.0);
}

TEST_CASE("theta2 recomputed from labeled triangle areas is exact") {
    CellGeometry g;
    auto m = build_cell_mesh(g, 8);
    CHECK(m.component_area(2) == Approx(0.25).margin(1e-15));
    CHECK(m.component_area(1) == Approx(0.75).margin(1e-15));
}

TEST_CASE("resolution 4 cell: interface counts by construction") {
    auto m = build_cell_mesh(CellGeometry{}, 4);
    // boundary of the central 2x2 block: 8 node pairs, 8 edge segments
    CHECK(m.interface_pairs.size() == 8);
    CHECK(m.interface_edges.size() == 8);
    CHECK(m.interface_length() == Approx(2.0));
}

TEST_CASE("incompatible resolution is rejected") {
    CHECK_THROWS_AS(build_cell_mesh(CellGeometry{}, 6), std::invalid_argument);
    CHECK_THROWS_AS(build_cell_mesh(CellGeometry{}, 2), std::invalid_argument);
    CHECK_NOTHROW(build_cell_mesh(CellGeometry{}, 12));
}

TEST_CASE("epsilon mesh n=2, r=4: tiled counts") {
    auto m = build_epsilon_mesh(CellGeometry{}, 2, 4);
    CHECK(m.interface_pairs.size() == 32); // 4 inclusions x 8 pairs
    CHECK(m.interface_edges.size() == 32);
    std::set<int> inclusion_cells;
    for (const auto& t : m.triangles)
        if (t.component == 2) inclusion_cells.insert(t.cell);
    CHECK(inclusion_cells.size() == 4);
    CHECK(m.periodic_pairs.empty());
}

TEST_CASE("n=1 epsilon mesh has cell-mesh topology without periodic pairs") {
    auto cell = build_cell_mesh(CellGeometry{}, 4);
    auto eps = build_epsilon_mesh(CellGeometry{}, 1, 4);
    CHECK(eps.node_count() == cell.node_count());
    CHECK(eps.triangle_count() == cell.triangle_count());
    CHECK(eps.interface_pairs.size() == cell.interface_pairs.size());
    CHECK(eps.periodic_pairs.empty());
    REQUIRE(!cell.periodic_pairs.empty());
    for (int i = 0; i < eps.node_count(); ++i) {
        CHECK(eps.vertices[i].x == cell.vertices[i].x);
        CHECK(eps.vertices[i].y == cell.vertices[i].y);
        CHECK(eps.node_component[i] == cell.node_component[i]);
    }
}

TEST_CASE("component measures are exact for every n") {
    for (int n : {1, 2, 3}) {
        auto m = build_epsilon_mesh(CellGeometry{}, n, 4);
        CHECK(m.component_area(2) == Approx(0.25).margin(1e-14));
        CHECK(m.component_area(1) == Approx(0.75).margin(1e-14));
    }
}

TEST_CASE("interface pairs have coincident coordinates") {
    auto m = build_epsilon_mesh(CellGeometry{}, 2, 4);
    for (const auto& p : m.interface_pairs) {
        CHECK(m.vertices[p.node1].x == m.vertices[p.node2].x);
        CHECK(m.vertices[p.node1].y == m.vertices[p.node2].y);
        CHECK(m.node_component[p.node1] == 1);
        CHECK(m.node_component[p.node2] == 2);
    }
}

TEST_CASE("periodic pairs form side bijections") {
    auto m = build_cell_mesh(CellGeometry{}, 8);
    int N = m.grid_side();
    std::set<int> left, right, bottom, top;
    for (const auto& p : m.periodic_pairs) {
        REQUIRE(p.a >= 0);
        REQUIRE(p.b >= 0);
        const Vec2& a = m.vertices[p.a];
        const Vec2& b = m.vertices[p.b];
        if (a.x == 0.0 && b.x == m.domain_lx && a.y == b.y) {
            left.insert(p.a);
            right.insert(p.b);
        } else {
            CHECK(a.y == 0.0);
            CHECK(b.y == m.domain_ly);
            CHECK(a.x == b.x);
            bottom.insert(p.a);
            top.insert(p.b);
        }
    }
    CHECK(left.size() == size_t(N + 1));
    CHECK(right.size() == size_t(N + 1));
    CHECK(bottom.size() == size_t(N + 1));
    CHECK(top.size() == size_t(N + 1));
}

TEST_CASE("boundary nodes are component 1 only") {
    auto m = build_epsilon_mesh(CellGeometry{}, 2, 4);
    REQUIRE(!m.boundary_nodes.empty());
    for (int b : m.boundary_nodes) CHECK(m.node_component[b] == 1);
}

TEST_CASE("all triangle areas positive; orientation consistent") {
    auto m = build_epsilon_mesh(CellGeometry{}, 2, 8);
    for (int t = 0; t < m.triangle_count(); ++t) CHECK(m.triangle_area(t) > 0.0);
}

TEST_CASE("interface edges touch exactly one triangle per component") {
    auto m = build_epsilon_mesh(CellGeometry{}, 2, 4);
    for (const auto& e : m.interface_edges) {
        CHECK(m.triangles[e.tri1].component == 1);
        CHECK(m.triangles[e.tri2].component == 2);
    }
}

TEST_CASE("mesh dump matches the golden file") {
    auto m = build_cell_mesh(CellGeometry{}, 4);
    std::ostringstream out;
    dump_mesh(m, out);
    std::ifstream gold(std::string(SIGHOM_TEST_DIR) + "/golden/cell_r4.txt");
    REQUIRE(gold.good());
    std::stringstream want;
    want << gold.rdbuf();
    CHECK(out.str() == want.str());
}
