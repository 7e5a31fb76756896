#pragma once

#include "sighom/geometry.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <vector>

namespace sighom {

struct Vec2 {
    double x = 0, y = 0;
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
};

struct Triangle {
    std::array<int, 3> v{};   // CCW
    int component = 1;        // 1 = matrix, 2 = inclusion
    int cell = 0;             // flattened cell index (tiling bookkeeping)
    int local = 0;            // triangle index within the reference cell mesh
};

/// Duplicated interface node: same coordinates, one copy per component.
/// The jump [v] at the pair is v[node1] - v[node2].
struct InterfacePair {
    int node1 = -1;  // component-1 copy
    int node2 = -1;  // component-2 copy
};

struct InterfaceEdge {
    int pa = -1, pb = -1;     // endpoint indices into interface_pairs
    int tri1 = -1, tri2 = -1; // adjacent triangle per component
    Vec2 normal1;             // unit outward normal of component 1 (points into the inclusion)
    double length = 0;
    int cell = 0;
    int local = 0;            // edge index within the reference cell mesh
};

struct PeriodicPair {
    int a = -1, b = -1;       // identified nodes on opposite cell edges
};

/// Conforming criss-cross triangulation of the two-component domain. Each
/// grid square is split into four triangles through its center, which keeps
/// the mesh invariant under the symmetries of the square. Interface nodes
/// are duplicated (one copy per component); periodic pairs are bookkeeping
/// only, identification happens at the solver level.
struct TwoComponentMesh {
    std::vector<Vec2> vertices;
    std::vector<int> node_component;
    std::vector<Triangle> triangles;
    std::vector<InterfacePair> interface_pairs;
    std::vector<InterfaceEdge> interface_edges;
    std::vector<int> boundary_nodes;          // nodes on the outer boundary
    std::vector<PeriodicPair> periodic_pairs; // cell meshes only

    // tiling structure
    int cells_per_side = 1;
    int resolution = 1;       // grid squares per cell and side
    double hx = 0, hy = 0;    // grid spacing
    double domain_lx = 1, domain_ly = 1;

    // grid-index lookup: -1 where a component has no copy
    std::vector<int> comp1_of_grid;
    std::vector<int> comp2_of_grid;
    std::vector<int> center_of_square;

    // reverse lookup per node: grid node (kind 0, coords ix,iy) or square
    // center (kind 1, coords i,j)
    struct NodeInfo { std::uint8_t kind = 0; int gx = 0, gy = 0; };
    std::vector<NodeInfo> node_info;

    int grid_side() const { return cells_per_side * resolution; }
    int node_count() const { return int(vertices.size()); }
    int triangle_count() const { return int(triangles.size()); }

    double triangle_area(int t) const {
        const auto& tr = triangles[t];
        Vec2 a = vertices[tr.v[0]], b = vertices[tr.v[1]], c = vertices[tr.v[2]];
        return 0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x));
    }
    Vec2 centroid(int t) const {
        const auto& tr = triangles[t];
        Vec2 a = vertices[tr.v[0]], b = vertices[tr.v[1]], c = vertices[tr.v[2]];
        return {(a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0};
    }

    double component_area(int comp) const {
        double s = 0;
        for (int t = 0; t < triangle_count(); ++t)
            if (triangles[t].component == comp) s += triangle_area(t);
        return s;
    }

    double interface_length() const {
        double s = 0;
        for (const auto& e : interface_edges) s += e.length;
        return s;
    }

    /// Lumped interface measure attached to each pair (half the adjacent
    /// edge lengths); sums to |interface|.
    std::vector<double> pair_measures() const {
        std::vector<double> m(interface_pairs.size(), 0.0);
        for (const auto& e : interface_edges) {
            m[e.pa] += 0.5 * e.length;
            m[e.pb] += 0.5 * e.length;
        }
        return m;
    }

    /// Global node id of component `comp` sitting at cell k with the local
    /// position described by the reference-cell node info.
    int node_at(int cell, const NodeInfo& local_info, int comp) const {
        int n = cells_per_side, r = resolution;
        int cx = cell % n, cy = cell / n;
        int gx = cx * r + local_info.gx;
        int gy = cy * r + local_info.gy;
        if (local_info.kind == 1) return center_of_square[gy * grid_side() + gx];
        int id = (comp == 1) ? comp1_of_grid[gy * (grid_side() + 1) + gx]
                             : comp2_of_grid[gy * (grid_side() + 1) + gx];
        return id;
    }
};

namespace detail {

struct GridCtx {
    int n = 1, r = 1, N = 1;
    long gx0 = 0, gx1 = 0, gy0 = 0, gy1 = 0;
    bool incl = false;

    int square_component(int i, int j) const {
        if (!incl) return 1;
        int li = i % r, lj = j % r;
        return (li >= gx0 && li < gx1 && lj >= gy0 && lj < gy1) ? 2 : 1;
    }
};

inline GridCtx make_grid_ctx(const CellGeometry& cell, int n, int r) {
    cell.validate();
    if (r <= 0) throw std::invalid_argument("mesh: resolution must be positive");
    GridCtx g;
    g.n = n; g.r = r; g.N = n * r;
    g.incl = cell.has_inclusion;
    if (g.incl) {
        if (!cell.resolution_compatible(r))
            throw std::invalid_argument(
                "mesh: resolution " + std::to_string(r) +
                " does not align the interface with grid lines (needs a multiple of " +
                std::to_string(cell.corner_denominator_lcm()) + ")");
        g.gx0 = cell.x0.num * (r / cell.x0.den);
        g.gx1 = cell.x1.num * (r / cell.x1.den);
        g.gy0 = cell.y0.num * (r / cell.y0.den);
        g.gy1 = cell.y1.num * (r / cell.y1.den);
    }
    return g;
}

inline TwoComponentMesh build_grid_mesh(const CellGeometry& cell, int n, int r, bool periodic) {
    GridCtx g = make_grid_ctx(cell, n, r);
    const int N = g.N;
    const int G = N + 1;

    TwoComponentMesh m;
    m.cells_per_side = n;
    m.resolution = r;
    m.domain_lx = (n == 1) ? cell.lx : 1.0;
    m.domain_ly = (n == 1) ? cell.ly : 1.0;
    m.hx = m.domain_lx / N;
    m.hy = m.domain_ly / N;

    // node roles from adjacent squares
    std::vector<std::uint8_t> role1(G * G, 0), role2(G * G, 0);
    for (int j = 0; j < N; ++j)
        for (int i = 0; i < N; ++i) {
            std::uint8_t* role = (g.square_component(i, j) == 1) ? role1.data() : role2.data();
            role[j * G + i] = role[j * G + i + 1] = 1;
            role[(j + 1) * G + i] = role[(j + 1) * G + i + 1] = 1;
        }

    m.comp1_of_grid.assign(G * G, -1);
    m.comp2_of_grid.assign(G * G, -1);
    m.center_of_square.assign(N * N, -1);

    auto add_node = [&](double x, double y, int comp, std::uint8_t kind, int gx, int gy) {
        m.vertices.push_back({x, y});
        m.node_component.push_back(comp);
        m.node_info.push_back({kind, gx, gy});
        return int(m.vertices.size()) - 1;
    };

    for (int j = 0; j < G; ++j)
        for (int i = 0; i < G; ++i)
            if (role1[j * G + i]) m.comp1_of_grid[j * G + i] = add_node(i * m.hx, j * m.hy, 1, 0, i, j);
    for (int j = 0; j < G; ++j)
        for (int i = 0; i < G; ++i)
            if (role2[j * G + i]) m.comp2_of_grid[j * G + i] = add_node(i * m.hx, j * m.hy, 2, 0, i, j);
    for (int j = 0; j < N; ++j)
        for (int i = 0; i < N; ++i)
            m.center_of_square[j * N + i] =
                add_node((i + 0.5) * m.hx, (j + 0.5) * m.hy, g.square_component(i, j), 1, i, j);

    // interface pairs in grid order
    std::vector<int> pair_of_grid(G * G, -1);
    for (int j = 0; j < G; ++j)
        for (int i = 0; i < G; ++i)
            if (role1[j * G + i] && role2[j * G + i]) {
                pair_of_grid[j * G + i] = int(m.interface_pairs.size());
                m.interface_pairs.push_back({m.comp1_of_grid[j * G + i], m.comp2_of_grid[j * G + i]});
            }

    // triangles: per square, fan around the center (bl,br,c) (br,tr,c) (tr,tl,c) (tl,bl,c)
    auto grid_node = [&](int i, int j, int comp) {
        int id = (comp == 1) ? m.comp1_of_grid[j * G + i] : m.comp2_of_grid[j * G + i];
        return id;
    };
    for (int j = 0; j < N; ++j)
        for (int i = 0; i < N; ++i) {
            int comp = g.square_component(i, j);
            int c = m.center_of_square[j * N + i];
            int bl = grid_node(i, j, comp), br = grid_node(i + 1, j, comp);
            int tr = grid_node(i + 1, j + 1, comp), tl = grid_node(i, j + 1, comp);
            int cellk = (j / r) * n + (i / r);
            int local_sq = (j % r) * r + (i % r);
            std::array<std::array<int, 3>, 4> tris = {{{bl, br, c}, {br, tr, c}, {tr, tl, c}, {tl, bl, c}}};
            for (int t = 0; t < 4; ++t)
                m.triangles.push_back({tris[t], comp, cellk, local_sq * 4 + t});
        }

    // interface edges aligned with grid lines; tri index of square (i,j), fan slot t
    auto tri_of = [&](int i, int j, int t) { return (j * N + i) * 4 + t; };
    // vertical edges (constant x)
    for (int j = 0; j < N; ++j)
        for (int i = 1; i < N; ++i) {
            int cl = g.square_component(i - 1, j), cr = g.square_component(i, j);
            if (cl == cr) continue;
            InterfaceEdge e;
            e.pa = pair_of_grid[j * G + i];
            e.pb = pair_of_grid[(j + 1) * G + i];
            e.length = m.hy;
            if (cl == 1) { // component 1 on the left
                e.normal1 = {1, 0};
                e.tri1 = tri_of(i - 1, j, 1);
                e.tri2 = tri_of(i, j, 3);
            } else {
                e.normal1 = {-1, 0};
                e.tri1 = tri_of(i, j, 3);
                e.tri2 = tri_of(i - 1, j, 1);
            }
            // interface lines never sit on cell seams, so i/r and j/r are the owning cell
            e.cell = (j / r) * n + (i / r);
            int li = i % r, lj = j % r;
            // local edge ordering: vertical edges first (row-major), then horizontal
            e.local = 2 * (lj - int(g.gy0)) + (li == g.gx0 ? 0 : 1);
            m.interface_edges.push_back(e);
        }
    // horizontal edges (constant y)
    for (int j = 1; j < N; ++j)
        for (int i = 0; i < N; ++i) {
            int cb = g.square_component(i, j - 1), ct = g.square_component(i, j);
            if (cb == ct) continue;
            InterfaceEdge e;
            e.pa = pair_of_grid[j * G + i];
            e.pb = pair_of_grid[j * G + i + 1];
            e.length = m.hx;
            if (cb == 1) { // component 1 below
                e.normal1 = {0, 1};
                e.tri1 = tri_of(i, j - 1, 2);
                e.tri2 = tri_of(i, j, 0);
            } else {
                e.normal1 = {0, -1};
                e.tri1 = tri_of(i, j, 0);
                e.tri2 = tri_of(i, j - 1, 2);
            }
            e.cell = (j / r) * n + (i / r);
            int li = i % r, lj = j % r;
            e.local = 2 * int(g.gy1 - g.gy0) + 2 * (li - int(g.gx0)) + (lj == g.gy0 ? 0 : 1);
            m.interface_edges.push_back(e);
        }

    // outer boundary (component 1 by construction: inclusions never meet it)
    for (int j = 0; j < G; ++j)
        for (int i = 0; i < G; ++i)
            if (i == 0 || j == 0 || i == N || j == N) {
                if (role2[j * G + i])
                    throw std::logic_error("mesh: inclusion reached the outer boundary");
                m.boundary_nodes.push_back(m.comp1_of_grid[j * G + i]);
            }

    if (periodic) {
        for (int j = 0; j < G; ++j)
            m.periodic_pairs.push_back({m.comp1_of_grid[j * G + 0], m.comp1_of_grid[j * G + N]});
        for (int i = 0; i < G; ++i)
            m.periodic_pairs.push_back({m.comp1_of_grid[0 * G + i], m.comp1_of_grid[N * G + i]});
    }
    return m;
}

} // namespace detail

/// Structured triangulation of the reference cell with duplicated interface
/// nodes and periodic pairs identifying opposite boundary edges.
inline TwoComponentMesh build_cell_mesh(const CellGeometry& cell, int resolution) {
    return detail::build_grid_mesh(cell, 1, resolution, /*periodic=*/true);
}

/// Mesh of Omega = (0,1)^2 as n x n scaled copies of the cell mesh.
inline TwoComponentMesh build_epsilon_mesh(const CellGeometry& cell, int n, int per_cell_resolution) {
    EpsilonDomain dom(cell, n); // validates n and unit cell lengths
    return detail::build_grid_mesh(dom.cell, n, per_cell_resolution, /*periodic=*/false);
}

/// Plain single-component mesh of the unit square (for homogenized solves).
inline TwoComponentMesh build_omega_mesh(int resolution) {
    return detail::build_grid_mesh(CellGeometry::without_inclusion(), resolution, 1, /*periodic=*/false);
}

/// Plain-text dump for golden-file tests: sections with one record per line.
inline void dump_mesh(const TwoComponentMesh& m, std::ostream& os) {
    os << "VERTICES " << m.node_count() << "\n";
    char buf[128];
    for (int i = 0; i < m.node_count(); ++i) {
        std::snprintf(buf, sizeof buf, "%d %.12g %.12g %d", i, m.vertices[i].x, m.vertices[i].y,
                      m.node_component[i]);
        os << buf << "\n";
    }
    os << "TRIANGLES " << m.triangle_count() << "\n";
    for (int t = 0; t < m.triangle_count(); ++t) {
        const auto& tr = m.triangles[t];
        os << t << " " << tr.v[0] << " " << tr.v[1] << " " << tr.v[2] << " " << tr.component << "\n";
    }
    os << "INTERFACE_PAIRS " << m.interface_pairs.size() << "\n";
    for (size_t p = 0; p < m.interface_pairs.size(); ++p)
        os << p << " " << m.interface_pairs[p].node1 << " " << m.interface_pairs[p].node2 << "\n";
    os << "PERIODIC_PAIRS " << m.periodic_pairs.size() << "\n";
    for (size_t p = 0; p < m.periodic_pairs.size(); ++p)
        os << m.periodic_pairs[p].a << " " << m.periodic_pairs[p].b << "\n";
}

} // namespace sighom
