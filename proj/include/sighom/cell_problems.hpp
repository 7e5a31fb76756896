#pragma once

#include "sighom/epsilon_problem.hpp"

#include <cmath>
#include <optional>

namespace sighom {

/// Correctors on the reference cell. Fields are nodal over the full cell
/// mesh; entries of nodes outside the participating component are zero.
struct CellSolution {
    enum class Kind { whole, perforated, vi };
    Kind kind;
    std::vector<Vector> correctors; // whole/perforated: one field per basis direction
    Vector field;                   // vi: chi1 on component-1 nodes, chi2 on component-2 nodes
    Eigen::Vector2d zeta = Eigen::Vector2d::Zero();
};

struct EffectiveTensor {
    Eigen::Matrix2d matrix = Eigen::Matrix2d::Identity();
    std::string regime;
};

/// The whole-cell tensor split A0 = A1 + A2 by component.
struct EffectiveTensorParts {
    Eigen::Matrix2d total, comp1, comp2;
};

namespace detail {

inline std::vector<std::pair<int, int>> as_pairs(const std::vector<PeriodicPair>& pp) {
    std::vector<std::pair<int, int>> v;
    v.reserve(pp.size());
    for (const auto& p : pp) v.emplace_back(p.a, p.b);
    return v;
}

/// Lumped (= exact for P1 traces) interface-mean weights of the glued cell
/// problem, normalized to sum 1, expressed on dofs.
inline Vector interface_mean_weights(const TwoComponentMesh& m, const DofMap& dofs, bool glued) {
    Vector w = Vector::Zero(dofs.ndof);
    auto measures = m.pair_measures();
    double total = 0;
    for (size_t p = 0; p < m.interface_pairs.size(); ++p) {
        const auto& pr = m.interface_pairs[p];
        if (glued) {
            w[dofs.dof_of_node[pr.node1]] += measures[p];
            total += measures[p];
        } else {
            // combined mean over both traces
            w[dofs.dof_of_node[pr.node1]] += 0.5 * measures[p];
            w[dofs.dof_of_node[pr.node2]] += 0.5 * measures[p];
            total += measures[p];
        }
    }
    if (total <= 0) throw std::invalid_argument("interface mean: geometry has no interface");
    return w / total;
}

/// Component-area mean weights (exact P1 integrals), normalized to sum 1.
inline Vector component_mean_weights(const TwoComponentMesh& m, const DofMap& dofs, int component) {
    Vector w = Vector::Zero(dofs.ndof);
    for (int t = 0; t < m.triangle_count(); ++t) {
        if (m.triangles[t].component != component) continue;
        double third = m.triangle_area(t) / 3.0;
        for (int i = 0; i < 3; ++i) {
            int d = dofs.dof_of_node[m.triangles[t].v[i]];
            if (d >= 0) w[d] += third;
        }
    }
    double total = w.sum();
    return w / total;
}

inline Vector scatter(const Vector& x, const DofMap& dofs) {
    Vector out = Vector::Zero(long(dofs.dof_of_node.size()));
    for (size_t i = 0; i < dofs.dof_of_node.size(); ++i)
        if (dofs.dof_of_node[i] >= 0) out[long(i)] = x[dofs.dof_of_node[i]];
    return out;
}

} // namespace detail

/// Whole-cell problem: -div(A grad(chi_j - y_j)) = 0 in Y, Y-periodic,
/// M_Gamma(chi_j) = 0. No jump: the two components are glued across Gamma.
inline CellSolution solve_cell_whole(const TwoComponentMesh& mesh, const CoefficientField& A,
                                     double cg_rtol = 1e-13) {
    auto table = pullback_coefficient(A, 1.0, mesh);
    auto pairs = detail::as_pairs(mesh.periodic_pairs);
    for (const auto& p : mesh.interface_pairs) pairs.emplace_back(p.node1, p.node2);
    auto dofs = DofMap::merged(mesh.node_count(), pairs, [](int) { return true; });
    SpMat K = assemble_stiffness(mesh, table, dofs);
    Vector w = mesh.interface_pairs.empty() ? detail::component_mean_weights(mesh, dofs, 1)
                                            : detail::interface_mean_weights(mesh, dofs, true);
    CellSolution sol;
    sol.kind = CellSolution::Kind::whole;
    for (int j = 0; j < 2; ++j) {
        Vector b = assemble_gradient_load(mesh, table, Eigen::Vector2d::Unit(j), dofs);
        Vector x = solve_with_mean_constraint(K, b, w, cg_rtol);
        sol.correctors.push_back(detail::scatter(x, dofs));
    }
    return sol;
}

/// Perforated-domain problem: -div(A grad(chi_j - y_j)) = 0 in Y1 with the
/// natural condition (A grad(chi_j - y_j)).nu = 0 on Gamma, Y-periodic,
/// M_{Y1}(chi_j) = 0. Component-1 unknowns only.
inline CellSolution solve_cell_perforated(const TwoComponentMesh& mesh, const CoefficientField& A,
                                          double cg_rtol = 1e-13) {
    auto table = pullback_coefficient(A, 1.0, mesh);
    auto dofs = DofMap::merged(mesh.node_count(), detail::as_pairs(mesh.periodic_pairs),
                               [&](int i) { return mesh.node_component[i] == 1; });
    SpMat K = assemble_stiffness(mesh, table, dofs, 1);
    Vector w = detail::component_mean_weights(mesh, dofs, 1);
    CellSolution sol;
    sol.kind = CellSolution::Kind::perforated;
    for (int j = 0; j < 2; ++j) {
        Vector b = assemble_gradient_load(mesh, table, Eigen::Vector2d::Unit(j), dofs, 1);
        Vector x = solve_with_mean_constraint(K, b, w, cg_rtol);
        sol.correctors.push_back(detail::scatter(x, dofs));
    }
    return sol;
}

struct CellVIOptions {
    PsorOptions psor;
    bool apply_constraint = true; // false: linear interface-penalty problem
};

struct CellVIProblem {
    DiscreteVI vi;
    DofMap dofs;
};

/// Discrete form of the cell variational inequality at gradient argument
/// zeta: minimize over the cone { z1 >= z2 on Gamma }
///   1/2 [ int_Y A grad z . grad z + int_Gamma h (z1-z2)^2 ] + int_Y A zeta . grad z
/// with z1 Y-periodic; one matrix dof is pinned to factor out the
/// common-constant kernel.
inline CellVIProblem make_cell_vi(const TwoComponentMesh& mesh, const CoefficientField& A,
                                  const InterfaceCoefficient& h, const Eigen::Vector2d& zeta,
                                  bool apply_constraint = true) {
    auto table = pullback_coefficient(A, 1.0, mesh);
    auto h_table = pullback_interface(h, mesh);
    CellVIProblem p;
    p.dofs = DofMap::merged(mesh.node_count(), detail::as_pairs(mesh.periodic_pairs),
                            [](int) { return true; });
    p.vi.A = SpMat(assemble_stiffness(mesh, table, p.dofs) +
                   assemble_jump_coupling(mesh, h_table, 1.0, p.dofs));
    p.vi.b = -assemble_gradient_load(mesh, table, zeta, p.dofs);
    if (apply_constraint)
        for (const auto& pr : mesh.interface_pairs)
            p.vi.constraint_pairs.emplace_back(p.dofs.dof_of_node[pr.node1], p.dofs.dof_of_node[pr.node2]);
    p.vi.pinned.push_back(p.dofs.dof_of_node[mesh.comp1_of_grid[0]]);
    return p;
}

/// Normalized cell-VI corrector pair from a solved unknown vector.
inline CellSolution cell_solution_from_vi(const Vector& dof_values, const DofMap& dofs,
                                          const TwoComponentMesh& mesh, const Eigen::Vector2d& zeta) {
    CellSolution sol;
    sol.kind = CellSolution::Kind::vi;
    sol.zeta = zeta;
    sol.field = detail::scatter(dof_values, dofs);
    Vector w = detail::interface_mean_weights(mesh, DofMap::identity(mesh.node_count()), false);
    sol.field -= w.dot(sol.field) * Vector::Ones(sol.field.size());
    return sol;
}

inline CellSolution solve_cell_vi(const TwoComponentMesh& mesh, const CoefficientField& A,
                                  const InterfaceCoefficient& h, const Eigen::Vector2d& zeta,
                                  const CellVIOptions& opt = {}) {
    CellVIProblem p = make_cell_vi(mesh, A, h, zeta, opt.apply_constraint);
    VISolution vs = solve_vi_psor(p.vi, opt.psor);
    return cell_solution_from_vi(vs.values, p.dofs, mesh, zeta);
}

/// P0 gradient of a nodal field on a triangle.
inline Eigen::Vector2d triangle_gradient(const TwoComponentMesh& m, int t, const Vector& u) {
    double area;
    auto grad = p1_gradients(m, t, area);
    Eigen::Vector2d g = Eigen::Vector2d::Zero();
    for (int i = 0; i < 3; ++i) g += u[m.triangles[t].v[i]] * grad[i];
    return g;
}

/// Averaged-flux tensor column by column: (1/|Y|) int A (e_j - grad chi_j),
/// over Y for the whole-cell kind, over Y1 for the perforated kind.
inline EffectiveTensorParts effective_tensor_parts(const CellSolution& sol, const TwoComponentMesh& mesh,
                                                   const CoefficientField& A) {
    if (sol.kind == CellSolution::Kind::vi)
        throw std::invalid_argument("effective_tensor: use effective_map_point for the vi kind");
    auto table = pullback_coefficient(A, 1.0, mesh);
    double cell_area = mesh.domain_lx * mesh.domain_ly;
    EffectiveTensorParts parts;
    parts.total.setZero();
    parts.comp1.setZero();
    parts.comp2.setZero();
    for (int j = 0; j < 2; ++j) {
        const Vector& chi = sol.correctors[size_t(j)];
        for (int t = 0; t < mesh.triangle_count(); ++t) {
            int comp = mesh.triangles[t].component;
            if (sol.kind == CellSolution::Kind::perforated && comp != 1) continue;
            Eigen::Vector2d flux = table[size_t(t)] * (Eigen::Vector2d::Unit(j) - triangle_gradient(mesh, t, chi));
            (comp == 1 ? parts.comp1 : parts.comp2).col(j) += mesh.triangle_area(t) * flux;
        }
    }
    parts.comp1 /= cell_area;
    parts.comp2 /= cell_area;
    parts.total = parts.comp1 + parts.comp2;
    return parts;
}

inline EffectiveTensor effective_tensor(const CellSolution& sol, const TwoComponentMesh& mesh,
                                        const CoefficientField& A) {
    EffectiveTensor t;
    t.matrix = effective_tensor_parts(sol, mesh, A).total;
    t.regime = sol.kind == CellSolution::Kind::whole ? "whole" : "perforated";
    return t;
}

struct MapPoint {
    Eigen::Vector2d total, comp1, comp2;
};

/// A0_{-1}(zeta) = sum_i (1/|Y|) int_{Y_i} A (zeta + grad chi_i(.,zeta)).
inline MapPoint effective_map_point_from(const CellSolution& sol, const TwoComponentMesh& mesh,
                                         const CoefficientField& A) {
    if (sol.kind != CellSolution::Kind::vi)
        throw std::invalid_argument("effective_map_point: needs a vi cell solution");
    auto table = pullback_coefficient(A, 1.0, mesh);
    double cell_area = mesh.domain_lx * mesh.domain_ly;
    MapPoint mp;
    mp.comp1.setZero();
    mp.comp2.setZero();
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        Eigen::Vector2d flux = table[size_t(t)] * (sol.zeta + triangle_gradient(mesh, t, sol.field));
        (mesh.triangles[t].component == 1 ? mp.comp1 : mp.comp2) += mesh.triangle_area(t) * flux;
    }
    mp.comp1 /= cell_area;
    mp.comp2 /= cell_area;
    mp.total = mp.comp1 + mp.comp2;
    return mp;
}

inline MapPoint effective_map_point(const TwoComponentMesh& mesh, const CoefficientField& A,
                                    const InterfaceCoefficient& h, const Eigen::Vector2d& zeta,
                                    const CellVIOptions& opt = {}) {
    if (zeta.norm() == 0) return {Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()};
    return effective_map_point_from(solve_cell_vi(mesh, A, h, zeta, opt), mesh, A);
}

/// Minimum cell energy at zeta, the second algebraic route to the quadratic
/// form of the effective object:
///   whole/perforated: zeta^T A0 zeta = (1/|Y|) int A(zeta - grad chi_zeta).(zeta - grad chi_zeta)
///   vi:               zeta . A0_{-1}(zeta) = (1/|Y|) [ int A(zeta+grad chi).(zeta+grad chi) + int_Gamma h [chi]^2 ]
inline double cell_energy_at(const CellSolution& sol, const TwoComponentMesh& mesh,
                             const CoefficientField& A, const InterfaceCoefficient* h,
                             const Eigen::Vector2d& zeta) {
    auto table = pullback_coefficient(A, 1.0, mesh);
    double cell_area = mesh.domain_lx * mesh.domain_ly;
    double e = 0;
    if (sol.kind == CellSolution::Kind::vi) {
        for (int t = 0; t < mesh.triangle_count(); ++t) {
            Eigen::Vector2d g = zeta + triangle_gradient(mesh, t, sol.field);
            e += mesh.triangle_area(t) * g.dot(table[size_t(t)] * g);
        }
        if (!h) throw std::invalid_argument("cell_energy_at: vi kind needs h");
        auto h_table = pullback_interface(*h, mesh);
        for (size_t ed = 0; ed < mesh.interface_edges.size(); ++ed) {
            const auto& e2 = mesh.interface_edges[ed];
            const auto& Ap = mesh.interface_pairs[size_t(e2.pa)];
            const auto& Bp = mesh.interface_pairs[size_t(e2.pb)];
            double sa = sol.field[Ap.node1] - sol.field[Ap.node2];
            double sb = sol.field[Bp.node1] - sol.field[Bp.node2];
            e += h_table[ed] * e2.length / 6.0 * (2 * sa * sa + 2 * sa * sb + 2 * sb * sb);
        }
    } else {
        Vector chi_zeta = zeta[0] * sol.correctors[0] + zeta[1] * sol.correctors[1];
        for (int t = 0; t < mesh.triangle_count(); ++t) {
            if (sol.kind == CellSolution::Kind::perforated && mesh.triangles[t].component != 1) continue;
            Eigen::Vector2d g = zeta - triangle_gradient(mesh, t, chi_zeta);
            e += mesh.triangle_area(t) * g.dot(table[size_t(t)] * g);
        }
    }
    return e / cell_area;
}

/// Positively 1-homogeneous effective map, tabulated on unit directions.
/// The 2-homogeneous potential W (W(zeta) = 1/2 zeta . A0_{-1}(zeta)) is
/// interpolated cubic-Hermite in angle -- each table vector v_m supplies the
/// exact value (v.e_r = 2W) and slope (v.e_theta = dW/dtheta) -- and the map
/// is evaluated as the exact gradient of that interpolant. This keeps the
/// evaluated map gradient-consistent with the energy it induces (a
/// piecewise-linear map of the vectors is not a gradient field, which makes
/// the homogenized energy descent stall at the interpolation error) while
/// still reproducing every table entry exactly. May also wrap an exact
/// linear tensor (consistency tests and the gamma < 1 regimes).
struct EffectiveMap {
    std::vector<MapPoint> table; // equispaced angles 2*pi*m/M
    bool exact_linear = false;
    Eigen::Matrix2d linear = Eigen::Matrix2d::Identity();
    double interp_error = 0;     // midpoint-angle estimate, relative
    double asymmetry = 0;        // max |v(theta+pi) + v(theta)| / scale

    static EffectiveMap from_tensor(const Eigen::Matrix2d& A) {
        EffectiveMap m;
        m.exact_linear = true;
        m.linear = A;
        return m;
    }

    int directions() const { return int(table.size()); }

    struct Angular {
        double w, dw;      // potential value and angular derivative at theta
        double r, theta;
        Eigen::Vector2d e_r, e_t;
    };

    Angular angular(const Eigen::Vector2d& zeta) const {
        constexpr double two_pi = 2.0 * 3.14159265358979323846;
        Angular a;
        a.r = zeta.norm();
        a.theta = std::atan2(zeta[1], zeta[0]);
        a.e_r = zeta / a.r;
        a.e_t = Eigen::Vector2d(-a.e_r[1], a.e_r[0]);
        const int M = int(table.size());
        const double dth = two_pi / M;
        double t = a.theta / dth;
        t -= std::floor(t / M) * M;
        int i0 = int(std::floor(t)) % M;
        int i1 = (i0 + 1) % M;
        double s = t - std::floor(t);
        auto knot = [&](int i, double& w, double& slope) {
            double th = dth * i;
            Eigen::Vector2d er(std::cos(th), std::sin(th)), et(-std::sin(th), std::cos(th));
            w = 0.5 * table[size_t(i)].total.dot(er);
            slope = table[size_t(i)].total.dot(et);
        };
        double w0, s0, w1, s1;
        knot(i0, w0, s0);
        knot(i1, w1, s1);
        double s2 = s * s, s3 = s2 * s;
        a.w = (2 * s3 - 3 * s2 + 1) * w0 + (s3 - 2 * s2 + s) * dth * s0 + (-2 * s3 + 3 * s2) * w1 +
              (s3 - s2) * dth * s1;
        a.dw = ((6 * s2 - 6 * s) * w0 + (3 * s2 - 4 * s + 1) * dth * s0 + (-6 * s2 + 6 * s) * w1 +
                (3 * s2 - 2 * s) * dth * s1) / dth;
        return a;
    }

    Eigen::Vector2d operator()(const Eigen::Vector2d& zeta) const {
        if (exact_linear) return linear * zeta;
        if (zeta.norm() == 0) return Eigen::Vector2d::Zero();
        Angular a = angular(zeta);
        return a.r * (2.0 * a.w * a.e_r + a.dw * a.e_t);
    }

    /// 2-homogeneous convex potential with grad W = the evaluated map.
    double potential(const Eigen::Vector2d& zeta) const {
        if (exact_linear) return 0.5 * zeta.dot(linear * zeta);
        if (zeta.norm() == 0) return 0.0;
        Angular a = angular(zeta);
        return a.r * a.r * a.w;
    }

    /// Per-component flux limits (diagnostics only): piecewise linear in
    /// angle of the tabulated component vectors.
    Eigen::Vector2d component(int l, const Eigen::Vector2d& zeta) const {
        if (exact_linear) return (l == 1 ? linear : Eigen::Matrix2d::Zero().eval()) * zeta;
        double r = zeta.norm();
        if (r == 0) return Eigen::Vector2d::Zero();
        constexpr double two_pi = 2.0 * 3.14159265358979323846;
        const int M = int(table.size());
        double t = std::atan2(zeta[1], zeta[0]) / two_pi * M;
        t -= std::floor(t / M) * M;
        int i0 = int(std::floor(t)) % M;
        double frac = t - std::floor(t);
        auto pick = [&](const MapPoint& p) -> const Eigen::Vector2d& { return l == 1 ? p.comp1 : p.comp2; };
        return r * ((1.0 - frac) * pick(table[size_t(i0)]) + frac * pick(table[size_t((i0 + 1) % M)]));
    }
};

/// Tabulate A0_{-1} on M equispaced unit directions (1-homogeneity makes the
/// table exact in radius). The interpolation error is estimated against
/// direct midpoint-angle evaluations.
inline EffectiveMap tabulate_effective_map(const TwoComponentMesh& mesh, const CoefficientField& A,
                                           const InterfaceCoefficient& h, int M,
                                           const CellVIOptions& opt = {}, bool estimate_error = true) {
    if (M < 16 || M % 2 != 0)
        throw std::invalid_argument("tabulate_effective_map: need an even direction count M >= 16");
    EffectiveMap map;
    map.table.resize(size_t(M));
    std::string failures;
    for (int m = 0; m < M; ++m) {
        double th = 2.0 * 3.14159265358979323846 * m / M;
        try {
            map.table[size_t(m)] =
                effective_map_point(mesh, A, h, Eigen::Vector2d(std::cos(th), std::sin(th)), opt);
        } catch (const SolverError& e) {
            failures += " " + std::to_string(m);
        }
    }
    if (!failures.empty())
        throw SolverError("tabulate_effective_map: cell VI failed at direction(s)" + failures, 0, 0);

    double scale = 1e-300;
    for (const auto& p : map.table) scale = std::max(scale, p.total.norm());
    for (int m = 0; m < M; ++m)
        map.asymmetry = std::max(map.asymmetry,
                                 (map.table[size_t((m + M / 2) % M)].total + map.table[size_t(m)].total).norm() / scale);
    // monotonicity of adjacent table entries (the map is a convex gradient)
    for (int m = 0; m < M; ++m) {
        double th0 = 2.0 * 3.14159265358979323846 * m / M;
        double th1 = 2.0 * 3.14159265358979323846 * (m + 1) / M;
        Eigen::Vector2d z0(std::cos(th0), std::sin(th0)), z1(std::cos(th1), std::sin(th1));
        double inner = (map.table[size_t((m + 1) % M)].total - map.table[size_t(m)].total).dot(z1 - z0);
        if (inner < -1e-10 * scale)
            throw SolverError("tabulate_effective_map: adjacent directions violate monotonicity", inner, m);
    }
    if (estimate_error) {
        for (int m = 0; m < M; ++m) {
            double th = 2.0 * 3.14159265358979323846 * (m + 0.5) / M;
            Eigen::Vector2d zeta(std::cos(th), std::sin(th));
            Eigen::Vector2d direct = effective_map_point(mesh, A, h, zeta, opt).total;
            map.interp_error = std::max(map.interp_error, (map(zeta) - direct).norm() / scale);
        }
    }
    return map;
}

} // namespace sighom
