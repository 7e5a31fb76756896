#pragma once

#include "sighom/cell_problems.hpp"

#include <cmath>
#include <vector>

namespace sighom {

/// Discrete unfolding T^eps_i: nodal values reindexed onto the product grid
/// (macro cell k) x (micro node of the reference cell mesh). Exact: the
/// eps-mesh is a tiled copy of the cell mesh, so no interpolation happens.
struct UnfoldedField {
    const TwoComponentMesh* cell = nullptr;
    int n = 1;          // macro cells per side, eps = 1/n
    int component = 1;
    std::vector<double> samples; // [k * cell->node_count() + local]

    double at(int k, int local) const { return samples[size_t(k) * size_t(cell->node_count()) + size_t(local)]; }
    double epsilon() const { return 1.0 / n; }
};

inline UnfoldedField unfold(const Vector& field, const TwoComponentMesh& eps_mesh,
                            const TwoComponentMesh& cell_mesh, int component) {
    if (eps_mesh.resolution != cell_mesh.resolution)
        throw std::invalid_argument("unfold: cell mesh resolution does not match the eps mesh");
    if (field.size() != eps_mesh.node_count())
        throw std::invalid_argument("unfold: field size does not match the eps mesh");
    UnfoldedField U;
    U.cell = &cell_mesh;
    U.n = eps_mesh.cells_per_side;
    U.component = component;
    const int L = cell_mesh.node_count();
    U.samples.assign(size_t(U.n) * size_t(U.n) * size_t(L), 0.0);
    for (int k = 0; k < U.n * U.n; ++k)
        for (int l = 0; l < L; ++l) {
            if (cell_mesh.node_component[l] != component) continue;
            int g = eps_mesh.node_at(k, cell_mesh.node_info[size_t(l)], component);
            if (g < 0) throw std::logic_error("unfold: missing tiled node");
            U.samples[size_t(k) * size_t(L) + size_t(l)] = field[g];
        }
    return U;
}

/// Unfolding of a function given in closed form on Omega:
/// T^eps_i(phi)(k, y) = phi(eps(k + y)).
inline UnfoldedField unfold_function(const SourceFn& phi, int n, const TwoComponentMesh& cell_mesh,
                                     int component) {
    UnfoldedField U;
    U.cell = &cell_mesh;
    U.n = n;
    U.component = component;
    const int L = cell_mesh.node_count();
    const double eps = 1.0 / n;
    U.samples.assign(size_t(n) * size_t(n) * size_t(L), 0.0);
    for (int k = 0; k < n * n; ++k) {
        double ox = (k % n) * eps, oy = (k / n) * eps;
        for (int l = 0; l < L; ++l) {
            if (cell_mesh.node_component[l] != component) continue;
            U.samples[size_t(k) * size_t(L) + size_t(l)] =
                phi(ox + eps * cell_mesh.vertices[size_t(l)].x, oy + eps * cell_mesh.vertices[size_t(l)].y);
        }
    }
    return U;
}

/// (1/|Y|) int_{Omega x Y_i} T(phi) dx dy, exact P1 quadrature per micro
/// triangle. With eps = 1/n this equals int_{Omega_i^eps} phi exactly.
inline double unfolded_integral(const UnfoldedField& U) {
    const auto& c = *U.cell;
    const int L = c.node_count();
    double macro = U.epsilon() * U.epsilon(); // cell x-measure / |Y|
    double total = 0;
    for (int k = 0; k < U.n * U.n; ++k) {
        const double* s = U.samples.data() + size_t(k) * size_t(L);
        double cellint = 0;
        for (int t = 0; t < c.triangle_count(); ++t) {
            if (c.triangles[t].component != U.component) continue;
            const auto& v = c.triangles[t].v;
            cellint += c.triangle_area(t) * (s[v[0]] + s[v[1]] + s[v[2]]) / 3.0;
        }
        total += macro * cellint;
    }
    return total;
}

/// (1/|Y|) int_{Omega x Y_i} T(phi)^2, exact quadrature of the P1 square.
inline double unfolded_l2_sq(const UnfoldedField& U) {
    const auto& c = *U.cell;
    const int L = c.node_count();
    double macro = U.epsilon() * U.epsilon();
    double total = 0;
    for (int k = 0; k < U.n * U.n; ++k) {
        const double* s = U.samples.data() + size_t(k) * size_t(L);
        double cellint = 0;
        for (int t = 0; t < c.triangle_count(); ++t) {
            if (c.triangles[t].component != U.component) continue;
            const auto& v = c.triangles[t].v;
            double a = s[v[0]], b = s[v[1]], d = s[v[2]];
            cellint += c.triangle_area(t) / 6.0 * (a * a + b * b + d * d + a * b + a * d + b * d);
        }
        total += macro * cellint;
    }
    return total;
}

/// Pointwise product of unfolded nodal data (Prop. of the operator: exact).
inline UnfoldedField unfolded_product(const UnfoldedField& a, const UnfoldedField& b) {
    UnfoldedField c = a;
    for (size_t i = 0; i < c.samples.size(); ++i) c.samples[i] *= b.samples[i];
    return c;
}

/// L2(Omega_i^eps) quantities of a nodal field restricted to one component,
/// exact P1 quadrature (for checking the unfolding identities).
inline double component_integral(const TwoComponentMesh& m, const Vector& u, int component) {
    double s = 0;
    for (int t = 0; t < m.triangle_count(); ++t) {
        if (m.triangles[t].component != component) continue;
        const auto& v = m.triangles[t].v;
        s += m.triangle_area(t) * (u[v[0]] + u[v[1]] + u[v[2]]) / 3.0;
    }
    return s;
}
inline double component_l2_sq(const TwoComponentMesh& m, const Vector& u, int component) {
    double s = 0;
    for (int t = 0; t < m.triangle_count(); ++t) {
        if (m.triangles[t].component != component) continue;
        const auto& v = m.triangles[t].v;
        double a = u[v[0]], b = u[v[1]], d = u[v[2]];
        s += m.triangle_area(t) / 6.0 * (a * a + b * b + d * d + a * b + a * d + b * d);
    }
    return s;
}

/// || T1(u1) - T2(u2) ||_{L2(Omega x Gamma)} from the micro traces; equals
/// sqrt(eps |Y|) ||[u]||_{L2(Gamma^eps)} when the tiling is exact.
inline double unfolded_jump_l2(const Vector& u, const TwoComponentMesh& eps_mesh) {
    double total = 0;
    double eps = 1.0 / eps_mesh.cells_per_side;
    for (const auto& e : eps_mesh.interface_edges) {
        const auto& A = eps_mesh.interface_pairs[size_t(e.pa)];
        const auto& B = eps_mesh.interface_pairs[size_t(e.pb)];
        double sa = u[A.node1] - u[A.node2];
        double sb = u[B.node1] - u[B.node2];
        double micro_len = e.length / eps;
        // per-cell x-measure eps^2; micro trace integral of the P1 square
        total += eps * eps * micro_len / 6.0 * (2 * sa * sa + 2 * sa * sb + 2 * sb * sb);
    }
    return std::sqrt(total);
}

struct InterfaceIdentity {
    double lhs = 0;       // eps int_{Gamma^eps} h^eps [u] phi
    double rhs = 0;       // (1/|Y|) int_{Omega x Gamma} h (T1 u1 - T2 u2) T1(phi)
    double abs_diff = 0;
    double lhs_sq = 0;    // same with phi replaced by [u]
    double rhs_sq = 0;
    double ineq_slack = 0; // lhs_sq - rhs_sq (>= 0 up to roundoff)
};

/// Both sides of the interface unfolding identity, evaluated with matching
/// Simpson quadrature (exact for the piecewise parts; phi is smooth).
inline InterfaceIdentity interface_identity_check(const Vector& u, const TwoComponentMesh& eps_mesh,
                                                  const InterfaceCoefficient& h, const SourceFn& phi) {
    InterfaceIdentity out;
    auto h_table = pullback_interface(h, eps_mesh);
    const double eps = 1.0 / eps_mesh.cells_per_side;

    // left side: walk the eps-mesh interface
    for (size_t e = 0; e < eps_mesh.interface_edges.size(); ++e) {
        const auto& ed = eps_mesh.interface_edges[e];
        const auto& A = eps_mesh.interface_pairs[size_t(ed.pa)];
        const auto& B = eps_mesh.interface_pairs[size_t(ed.pb)];
        double sa = u[A.node1] - u[A.node2];
        double sb = u[B.node1] - u[B.node2];
        Vec2 pa = eps_mesh.vertices[size_t(A.node1)];
        Vec2 pb = eps_mesh.vertices[size_t(B.node1)];
        double fa = phi(pa.x, pa.y), fb = phi(pb.x, pb.y);
        double fm = phi(0.5 * (pa.x + pb.x), 0.5 * (pa.y + pb.y));
        double sm = 0.5 * (sa + sb);
        out.lhs += eps * h_table[e] * ed.length / 6.0 * (sa * fa + 4.0 * sm * fm + sb * fb);
        out.lhs_sq += eps * h_table[e] * ed.length / 6.0 * (sa * sa + 4.0 * sm * sm + sb * sb);
    }

    // right side: walk cells x the reference interface. T1(phi)(k,y) =
    // phi(eps k + eps y), and the micro points eps(k+y) coincide with the
    // eps-mesh edge points, so the evaluation goes through the tiling.
    const int n = eps_mesh.cells_per_side;
    for (int k = 0; k < n * n; ++k) {
        for (size_t e = 0; e < eps_mesh.interface_edges.size(); ++e) {
            const auto& ed = eps_mesh.interface_edges[e];
            if (ed.cell != k) continue;
            const auto& A = eps_mesh.interface_pairs[size_t(ed.pa)];
            const auto& B = eps_mesh.interface_pairs[size_t(ed.pb)];
            double da = u[A.node1] - u[A.node2]; // T1(u1) - T2(u2) at the micro node
            double db = u[B.node1] - u[B.node2];
            Vec2 pa = eps_mesh.vertices[size_t(A.node1)];
            Vec2 pb = eps_mesh.vertices[size_t(B.node1)];
            double fa = phi(pa.x, pa.y);
            double fb = phi(pb.x, pb.y);
            double fm = phi(0.5 * (pa.x + pb.x), 0.5 * (pa.y + pb.y));
            double dm = 0.5 * (da + db);
            double micro_len = ed.length / eps;
            double w = eps * eps * micro_len / 6.0 * h_table[e];
            out.rhs += w * (da * fa + 4.0 * dm * fm + db * fb);
            out.rhs_sq += w * (da * da + 4.0 * dm * dm + db * db);
        }
    }
    out.abs_diff = std::abs(out.lhs - out.rhs);
    out.ineq_slack = out.lhs_sq - out.rhs_sq;
    return out;
}

/// Window-averaged L2 distance between the zero-extended eps-field on Omega_i^eps
/// and theta_i times the homogenized field: the computable surrogate for the
/// weak L2 convergence of the limit statement. H = windows^-1 must be a multiple of eps
/// and align with the homogenized mesh.
inline double weak_convergence_metric(const Vector& eps_field, const TwoComponentMesh& eps_mesh,
                                      int component, double theta, const Vector& homog_field,
                                      const TwoComponentMesh& homog_mesh, int windows_per_side) {
    const int w = windows_per_side;
    if (w <= 0 || eps_mesh.cells_per_side % w != 0)
        throw std::invalid_argument("weak_convergence_metric: window is not a multiple of eps");
    if (homog_mesh.grid_side() % w != 0)
        throw std::invalid_argument("weak_convergence_metric: window does not align with the homogenized mesh");
    std::vector<double> eps_int(size_t(w) * size_t(w), 0.0), hom_int(size_t(w) * size_t(w), 0.0);
    for (int t = 0; t < eps_mesh.triangle_count(); ++t) {
        if (eps_mesh.triangles[t].component != component) continue;
        Vec2 c = eps_mesh.centroid(t);
        int wi = std::min(int(c.x * w), w - 1), wj = std::min(int(c.y * w), w - 1);
        const auto& v = eps_mesh.triangles[t].v;
        eps_int[size_t(wj) * size_t(w) + size_t(wi)] +=
            eps_mesh.triangle_area(t) * (eps_field[v[0]] + eps_field[v[1]] + eps_field[v[2]]) / 3.0;
    }
    for (int t = 0; t < homog_mesh.triangle_count(); ++t) {
        Vec2 c = homog_mesh.centroid(t);
        int wi = std::min(int(c.x * w), w - 1), wj = std::min(int(c.y * w), w - 1);
        const auto& v = homog_mesh.triangles[t].v;
        hom_int[size_t(wj) * size_t(w) + size_t(wi)] +=
            homog_mesh.triangle_area(t) * (homog_field[v[0]] + homog_field[v[1]] + homog_field[v[2]]) / 3.0;
    }
    double window_area = 1.0 / double(w) / double(w);
    double metric_sq = 0;
    for (size_t i = 0; i < eps_int.size(); ++i) {
        double diff = eps_int[i] - theta * hom_int[i];
        metric_sq += diff * diff / window_area;
    }
    return std::sqrt(metric_sq);
}

/// Window averages of the per-triangle flux A grad u restricted to one
/// component, zero-extended to Omega.
inline std::vector<Eigen::Vector2d> window_flux_average(const Vector& u, const TwoComponentMesh& mesh,
                                                        const std::vector<Eigen::Matrix2d>& coeff,
                                                        int component, int windows_per_side) {
    const int w = windows_per_side;
    if (w <= 0 || mesh.cells_per_side % w != 0)
        throw std::invalid_argument("window_flux_average: window is not a multiple of eps");
    std::vector<Eigen::Vector2d> acc(size_t(w) * size_t(w), Eigen::Vector2d::Zero());
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        if (component != 0 && mesh.triangles[t].component != component) continue;
        Vec2 c = mesh.centroid(t);
        int wi = std::min(int(c.x * w), w - 1), wj = std::min(int(c.y * w), w - 1);
        acc[size_t(wj) * size_t(w) + size_t(wi)] +=
            mesh.triangle_area(t) * (coeff[size_t(t)] * triangle_gradient(mesh, t, u));
    }
    double window_area = 1.0 / double(w) / double(w);
    for (auto& v : acc) v /= window_area;
    return acc;
}

/// Window averages of the P1 gradient of a homogenized field.
inline std::vector<Eigen::Vector2d> window_gradient_average(const Vector& u, const TwoComponentMesh& mesh,
                                                            int windows_per_side) {
    const int w = windows_per_side;
    if (w <= 0 || mesh.grid_side() % w != 0)
        throw std::invalid_argument("window_gradient_average: window does not align with the mesh");
    std::vector<Eigen::Vector2d> acc(size_t(w) * size_t(w), Eigen::Vector2d::Zero());
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        Vec2 c = mesh.centroid(t);
        int wi = std::min(int(c.x * w), w - 1), wj = std::min(int(c.y * w), w - 1);
        acc[size_t(wj) * size_t(w) + size_t(wi)] += mesh.triangle_area(t) * triangle_gradient(mesh, t, u);
    }
    double window_area = 1.0 / double(w) / double(w);
    for (auto& v : acc) v /= window_area;
    return acc;
}

/// L2-type window metric || a - b || = sqrt(sum |window| |a_w - b_w|^2).
inline double window_metric(const std::vector<Eigen::Vector2d>& a, const std::vector<Eigen::Vector2d>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("window_metric: size mismatch");
    double window_area = 1.0 / double(a.size());
    double s = 0;
    for (size_t i = 0; i < a.size(); ++i) s += window_area * (a[i] - b[i]).squaredNorm();
    return std::sqrt(s);
}
inline double window_norm(const std::vector<Eigen::Vector2d>& a) {
    return window_metric(a, std::vector<Eigen::Vector2d>(a.size(), Eigen::Vector2d::Zero()));
}

} // namespace sighom
