#pragma once

#include "sighom/mesh.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace sighom {

using SourceFn = std::function<double(double, double)>;

/// Y-periodic diffusion matrix A(y): symmetric positive definite, piecewise
/// constant per component, optionally overridden by a per-triangle table on
/// the reference cell mesh.
struct CoefficientField {
    Eigen::Matrix2d A1 = Eigen::Matrix2d::Identity();
    Eigen::Matrix2d A2 = Eigen::Matrix2d::Identity();
    std::vector<Eigen::Matrix2d> cell_triangle_table; // indexed by local triangle id

    static CoefficientField isotropic(double a1, double a2) {
        CoefficientField c;
        c.A1 = a1 * Eigen::Matrix2d::Identity();
        c.A2 = a2 * Eigen::Matrix2d::Identity();
        c.validate();
        return c;
    }

    void validate() const {
        for (const Eigen::Matrix2d* A : {&A1, &A2}) {
            if (std::abs((*A)(0, 1) - (*A)(1, 0)) > 1e-14)
                throw std::invalid_argument("CoefficientField: matrix must be symmetric");
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(*A);
            if (es.eigenvalues()(0) <= 0)
                throw std::invalid_argument("CoefficientField: matrix must be positive definite");
        }
        for (const auto& A : cell_triangle_table) {
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(A);
            if (es.eigenvalues()(0) <= 0)
                throw std::invalid_argument("CoefficientField: table entry not positive definite");
        }
    }

    /// Ellipticity lower bound alpha over all values.
    double alpha() const {
        double a = std::min(Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(A1).eigenvalues()(0),
                            Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(A2).eigenvalues()(0));
        for (const auto& A : cell_triangle_table)
            a = std::min(a, Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(A).eigenvalues()(0));
        return a;
    }
    /// Boundedness constant beta.
    double beta() const {
        double b = std::max(Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(A1).eigenvalues()(1),
                            Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(A2).eigenvalues()(1));
        for (const auto& A : cell_triangle_table)
            b = std::max(b, Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(A).eigenvalues()(1));
        return b;
    }

    Eigen::Matrix2d value(int component, int local_triangle) const {
        if (!cell_triangle_table.empty()) {
            if (local_triangle < 0 || local_triangle >= int(cell_triangle_table.size()))
                throw std::out_of_range("CoefficientField: local triangle outside table");
            return cell_triangle_table[size_t(local_triangle)];
        }
        return component == 1 ? A1 : A2;
    }
};

/// Interface exchange coefficient h on Gamma: positive, piecewise constant
/// per interface edge of the reference cell.
struct InterfaceCoefficient {
    double h_const = 1.0;
    std::vector<double> cell_edge_table; // indexed by local interface edge id

    static InterfaceCoefficient constant(double h) {
        InterfaceCoefficient c;
        c.h_const = h;
        c.validate();
        return c;
    }

    void validate() const {
        if (cell_edge_table.empty()) {
            if (h_const <= 0) throw std::invalid_argument("InterfaceCoefficient: h must satisfy h > h0 > 0");
        } else {
            for (double v : cell_edge_table)
                if (v <= 0) throw std::invalid_argument("InterfaceCoefficient: h must satisfy h > h0 > 0");
        }
    }

    double h0() const {
        if (cell_edge_table.empty()) return h_const;
        double m = cell_edge_table[0];
        for (double v : cell_edge_table) m = std::min(m, v);
        return m;
    }

    double value(int local_edge) const {
        if (cell_edge_table.empty()) return h_const;
        if (local_edge < 0 || local_edge >= int(cell_edge_table.size()))
            throw std::out_of_range("InterfaceCoefficient: local edge outside table");
        return cell_edge_table[size_t(local_edge)];
    }
};

/// A(x/eps) sampled per triangle. Meshes are tiled copies of the cell mesh,
/// so the piecewise-constant pullback is exact: the table simply repeats
/// with the tiling.
inline std::vector<Eigen::Matrix2d> pullback_coefficient(const CoefficientField& field, double epsilon,
                                                         const TwoComponentMesh& mesh) {
    double mesh_eps = 1.0 / mesh.cells_per_side;
    if (std::abs(epsilon - mesh_eps) > 1e-12 * mesh_eps)
        throw std::invalid_argument("pullback_coefficient: mesh was not built with this epsilon");
    std::vector<Eigen::Matrix2d> table(mesh.triangles.size());
    for (size_t t = 0; t < mesh.triangles.size(); ++t)
        table[t] = field.value(mesh.triangles[t].component, mesh.triangles[t].local);
    return table;
}

/// h(x/eps) sampled per interface edge.
inline std::vector<double> pullback_interface(const InterfaceCoefficient& h, const TwoComponentMesh& mesh) {
    std::vector<double> table(mesh.interface_edges.size());
    for (size_t e = 0; e < mesh.interface_edges.size(); ++e)
        table[e] = h.value(mesh.interface_edges[e].local);
    return table;
}

} // namespace sighom
