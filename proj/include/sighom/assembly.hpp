#pragma once

#include "sighom/coefficients.hpp"
#include "sighom/mesh.hpp"

#include <Eigen/Sparse>
#include <array>
#include <functional>
#include <vector>

namespace sighom {

using SpMat = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

/// Node -> degree-of-freedom map. Identity by default; merging (periodic
/// identification, interface gluing) and component restriction are expressed
/// by mapping several nodes to one dof or to -1 (excluded).
struct DofMap {
    std::vector<int> dof_of_node;
    int ndof = 0;

    static DofMap identity(int n) {
        DofMap d;
        d.dof_of_node.resize(n);
        for (int i = 0; i < n; ++i) d.dof_of_node[i] = i;
        d.ndof = n;
        return d;
    }

    /// Union-find merge of node groups, optionally keeping only nodes
    /// accepted by `keep`; dofs numbered by smallest member node.
    template <class Keep>
    static DofMap merged(int n, const std::vector<std::pair<int, int>>& identify, Keep keep) {
        std::vector<int> parent(n);
        for (int i = 0; i < n; ++i) parent[i] = i;
        std::function<int(int)> find = [&](int a) {
            while (parent[a] != a) { parent[a] = parent[parent[a]]; a = parent[a]; }
            return a;
        };
        for (auto [a, b] : identify) {
            int ra = find(a), rb = find(b);
            if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
        }
        DofMap d;
        d.dof_of_node.assign(n, -1);
        int next = 0;
        std::vector<int> dof_of_root(n, -1);
        for (int i = 0; i < n; ++i) {
            if (!keep(i)) continue;
            int r = find(i);
            if (dof_of_root[r] == -1) dof_of_root[r] = next++;
            d.dof_of_node[i] = dof_of_root[r];
        }
        d.ndof = next;
        return d;
    }
};

/// P1 gradients of the three barycentric basis functions (constant per
/// triangle) and the signed area.
inline std::array<Eigen::Vector2d, 3> p1_gradients(const TwoComponentMesh& m, int t, double& area) {
    const auto& tr = m.triangles[t];
    Vec2 a = m.vertices[tr.v[0]], b = m.vertices[tr.v[1]], c = m.vertices[tr.v[2]];
    double det = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    area = 0.5 * det;
    return {Eigen::Vector2d{(b.y - c.y) / det, (c.x - b.x) / det},
            Eigen::Vector2d{(c.y - a.y) / det, (a.x - c.x) / det},
            Eigen::Vector2d{(a.y - b.y) / det, (b.x - a.x) / det}};
}

/// Stiffness sum_T area * grad v^T A_T grad w over triangles whose component
/// passes `component_filter` (0 = both).
inline SpMat assemble_stiffness(const TwoComponentMesh& m, const std::vector<Eigen::Matrix2d>& coeff,
                                const DofMap& dofs, int component_filter = 0) {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(m.triangles.size() * 9);
    for (int t = 0; t < m.triangle_count(); ++t) {
        const auto& tr = m.triangles[t];
        if (component_filter != 0 && tr.component != component_filter) continue;
        double area;
        auto grad = p1_gradients(m, t, area);
        const Eigen::Matrix2d& A = coeff[size_t(t)];
        for (int i = 0; i < 3; ++i) {
            int di = dofs.dof_of_node[tr.v[i]];
            if (di < 0) continue;
            for (int j = 0; j < 3; ++j) {
                int dj = dofs.dof_of_node[tr.v[j]];
                if (dj < 0) continue;
                trips.emplace_back(di, dj, area * grad[i].dot(A * grad[j]));
            }
        }
    }
    SpMat K(dofs.ndof, dofs.ndof);
    K.setFromTriplets(trips.begin(), trips.end());
    return K;
}

/// Interface jump form scale * sum_edges h_e int_e [u][v] with exact
/// integration of the linear traces (edge mass matrix [[2,1],[1,2]]*L/6).
inline SpMat assemble_jump_coupling(const TwoComponentMesh& m, const std::vector<double>& h_edge,
                                    double scale, const DofMap& dofs) {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(m.interface_edges.size() * 16);
    const double base[2][2] = {{2.0, 1.0}, {1.0, 2.0}};
    for (size_t e = 0; e < m.interface_edges.size(); ++e) {
        const auto& ed = m.interface_edges[e];
        double c = scale * h_edge[e] * ed.length / 6.0;
        const InterfacePair& A = m.interface_pairs[size_t(ed.pa)];
        const InterfacePair& B = m.interface_pairs[size_t(ed.pb)];
        int node[4] = {A.node1, A.node2, B.node1, B.node2};
        double sign[4] = {1, -1, 1, -1};
        int vert[4] = {0, 0, 1, 1};
        for (int i = 0; i < 4; ++i) {
            int di = dofs.dof_of_node[node[i]];
            if (di < 0) continue;
            for (int j = 0; j < 4; ++j) {
                int dj = dofs.dof_of_node[node[j]];
                if (dj < 0) continue;
                trips.emplace_back(di, dj, c * base[vert[i]][vert[j]] * sign[i] * sign[j]);
            }
        }
    }
    SpMat H(dofs.ndof, dofs.ndof);
    H.setFromTriplets(trips.begin(), trips.end());
    return H;
}

/// Load vector int f v with the midpoint (centroid) rule per triangle.
inline Vector assemble_load(const TwoComponentMesh& m, const SourceFn& f, const DofMap& dofs,
                            int component_filter = 0) {
    Vector F = Vector::Zero(dofs.ndof);
    for (int t = 0; t < m.triangle_count(); ++t) {
        const auto& tr = m.triangles[t];
        if (component_filter != 0 && tr.component != component_filter) continue;
        Vec2 c = m.centroid(t);
        double contrib = m.triangle_area(t) * f(c.x, c.y) / 3.0;
        for (int i = 0; i < 3; ++i) {
            int di = dofs.dof_of_node[tr.v[i]];
            if (di >= 0) F[di] += contrib;
        }
    }
    return F;
}

/// Cell-problem load int_{filter} (A zeta) . grad v (exact: P0 integrand).
inline Vector assemble_gradient_load(const TwoComponentMesh& m, const std::vector<Eigen::Matrix2d>& coeff,
                                     const Eigen::Vector2d& zeta, const DofMap& dofs,
                                     int component_filter = 0) {
    Vector F = Vector::Zero(dofs.ndof);
    for (int t = 0; t < m.triangle_count(); ++t) {
        const auto& tr = m.triangles[t];
        if (component_filter != 0 && tr.component != component_filter) continue;
        double area;
        auto grad = p1_gradients(m, t, area);
        Eigen::Vector2d Az = coeff[size_t(t)] * zeta;
        for (int i = 0; i < 3; ++i) {
            int di = dofs.dof_of_node[tr.v[i]];
            if (di >= 0) F[di] += area * Az.dot(grad[i]);
        }
    }
    return F;
}

/// Consistent P1 mass matrix area/12 * [[2,1,1],[1,2,1],[1,1,2]].
inline SpMat assemble_mass(const TwoComponentMesh& m, const DofMap& dofs, int component_filter = 0) {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(m.triangles.size() * 9);
    for (int t = 0; t < m.triangle_count(); ++t) {
        const auto& tr = m.triangles[t];
        if (component_filter != 0 && tr.component != component_filter) continue;
        double area = m.triangle_area(t);
        for (int i = 0; i < 3; ++i) {
            int di = dofs.dof_of_node[tr.v[i]];
            if (di < 0) continue;
            for (int j = 0; j < 3; ++j) {
                int dj = dofs.dof_of_node[tr.v[j]];
                if (dj < 0) continue;
                trips.emplace_back(di, dj, area / 12.0 * (i == j ? 2.0 : 1.0));
            }
        }
    }
    SpMat M(dofs.ndof, dofs.ndof);
    M.setFromTriplets(trips.begin(), trips.end());
    return M;
}

/// Symmetric elimination of homogeneous Dirichlet dofs: unit diagonal,
/// zeroed rows/columns and load entries.
inline void eliminate_dirichlet(SpMat& A, Vector& b, const std::vector<std::uint8_t>& mask) {
    for (int k = 0; k < A.outerSize(); ++k)
        for (SpMat::InnerIterator it(A, k); it; ++it) {
            bool r = mask[size_t(it.row())], c = mask[size_t(it.col())];
            if (r || c) it.valueRef() = (it.row() == it.col()) ? 1.0 : 0.0;
        }
    A.prune(0.0);
    for (int i = 0; i < b.size(); ++i)
        if (mask[size_t(i)]) b[i] = 0.0;
}

/// Discrete form of the eps-problem: quadratic energy
///   1/2 v^T (K + eps^gamma H) v - F^T v
/// over all mesh unknowns, with Dirichlet nodes of component 1 eliminated.
struct DiscreteSystem {
    SpMat stiffness;           // K (after symmetric Dirichlet elimination)
    SpMat interface_coupling;  // eps^gamma H, supported on interface-pair nodes
    Vector load;
    std::vector<std::uint8_t> dirichlet_mask;

    int size() const { return int(load.size()); }
    SpMat matrix() const { return SpMat(stiffness + interface_coupling); }
};

inline DiscreteSystem assemble(const TwoComponentMesh& mesh, const CoefficientField& coeff,
                               const InterfaceCoefficient& h_coeff, double gamma, double epsilon,
                               const SourceFn& f) {
    if (gamma > 1.0)
        throw std::invalid_argument("assemble: gamma must satisfy gamma <= 1");
    auto dofs = DofMap::identity(mesh.node_count());
    auto table = pullback_coefficient(coeff, epsilon, mesh);
    auto h_table = pullback_interface(h_coeff, mesh);

    DiscreteSystem sys;
    sys.stiffness = assemble_stiffness(mesh, table, dofs);
    sys.interface_coupling = assemble_jump_coupling(mesh, h_table, std::pow(epsilon, gamma), dofs);
    sys.load = assemble_load(mesh, f, dofs);
    sys.dirichlet_mask.assign(size_t(mesh.node_count()), 0);
    for (int b : mesh.boundary_nodes) sys.dirichlet_mask[size_t(b)] = 1;
    eliminate_dirichlet(sys.stiffness, sys.load, sys.dirichlet_mask);
    // interface pairs never sit on the outer boundary, so the coupling is
    // untouched by the elimination
    for (const auto& p : mesh.interface_pairs)
        if (sys.dirichlet_mask[size_t(p.node1)] || sys.dirichlet_mask[size_t(p.node2)])
            throw std::logic_error("assemble: interface pair on the Dirichlet boundary");
    return sys;
}

/// Coordinate-format dump (row col value), one entry per line.
inline void dump_matrix(const SpMat& A, std::ostream& os) {
    char buf[96];
    for (int k = 0; k < A.outerSize(); ++k)
        for (SpMat::InnerIterator it(A, k); it; ++it) {
            std::snprintf(buf, sizeof buf, "%ld %ld %.17g", long(it.row()), long(it.col()), it.value());
            os << buf << "\n";
        }
}

} // namespace sighom
