#pragma once

#include <numeric>
#include <stdexcept>
#include <string>

namespace sighom {

/// Exact rational coordinate, used for inclusion corners so the interface
/// can be aligned with mesh lines without rounding.
struct Frac {
    long num = 0;
    long den = 1;

    Frac() = default;
    Frac(long n, long d) : num(n), den(d) {
        if (den <= 0) throw std::invalid_argument("Frac: denominator must be positive");
        long g = std::gcd(num < 0 ? -num : num, den);
        if (g > 1) { num /= g; den /= g; }
    }

    double value() const { return double(num) / double(den); }

    bool operator==(const Frac& o) const { return num == o.num && den == o.den; }

    // "3/4" or "0.75"-free: only p/q and integers are accepted.
    static Frac parse(const std::string& s) {
        auto slash = s.find('/');
        try {
            if (slash == std::string::npos) return Frac(std::stol(s), 1);
            return Frac(std::stol(s.substr(0, slash)), std::stol(s.substr(slash + 1)));
        } catch (const std::logic_error&) {
            throw std::invalid_argument("Frac: cannot parse '" + s + "'");
        }
    }

    std::string str() const {
        if (den == 1) return std::to_string(num);
        return std::to_string(num) + "/" + std::to_string(den);
    }
};

/// Reference cell Y = (0,l1) x (0,l2) with an axis-aligned rectangular
/// inclusion Y2 strictly inside. Corners are rationals in cell units, so an
/// r-resolution grid with r divisible by all denominators meshes the
/// interface exactly.
struct CellGeometry {
    double lx = 1.0, ly = 1.0;
    bool has_inclusion = true;
    Frac x0{1, 4}, y0{1, 4}, x1{3, 4}, y1{3, 4};

    static CellGeometry unit_with_inclusion(Frac ax, Frac ay, Frac bx, Frac by) {
        CellGeometry g;
        g.x0 = ax; g.y0 = ay; g.x1 = bx; g.y1 = by;
        g.validate();
        return g;
    }

    /// Degenerate configuration without a second component (theta2 = 0).
    static CellGeometry without_inclusion() {
        CellGeometry g;
        g.has_inclusion = false;
        return g;
    }

    void validate() const {
        if (lx <= 0 || ly <= 0) throw std::invalid_argument("CellGeometry: cell lengths must be positive");
        if (!has_inclusion) return;
        auto in01 = [](const Frac& f) { return f.num > 0 && f.num < f.den; };
        if (!(in01(x0) && in01(y0) && in01(x1) && in01(y1)))
            throw std::invalid_argument("CellGeometry: inclusion closure must lie strictly inside the cell");
        if (!(x0.value() < x1.value() && y0.value() < y1.value()))
            throw std::invalid_argument("CellGeometry: inclusion must have positive area");
    }

    double cell_area() const { return lx * ly; }

    /// Inclusion area fraction; exact because corners are rational.
    double theta2() const {
        if (!has_inclusion) return 0.0;
        return (x1.value() - x0.value()) * (y1.value() - y0.value());
    }
    double theta1() const { return 1.0 - theta2(); }

    /// |Gamma|, the inclusion perimeter in physical units.
    double interface_perimeter() const {
        if (!has_inclusion) return 0.0;
        return 2.0 * ((x1.value() - x0.value()) * lx + (y1.value() - y0.value()) * ly);
    }

    /// Smallest resolution aligning the interface with grid lines.
    long corner_denominator_lcm() const {
        if (!has_inclusion) return 1;
        long l = std::lcm(x0.den, x1.den);
        l = std::lcm(l, y0.den);
        l = std::lcm(l, y1.den);
        return l;
    }

    bool resolution_compatible(int r) const { return r > 0 && r % corner_denominator_lcm() == 0; }
};

/// The eps-tiled domain Omega = (0,1)^2 with eps = 1/n. Restricting eps to
/// reciprocals of integers makes the tiling exact: no residual boundary
/// layer, and every scaled inclusion stays strictly inside Omega.
struct EpsilonDomain {
    CellGeometry cell;
    int n = 1;

    EpsilonDomain(CellGeometry c, int n_) : cell(std::move(c)), n(n_) {
        if (n <= 0) throw std::invalid_argument("EpsilonDomain: n must be a positive integer");
        if (cell.lx != 1.0 || cell.ly != 1.0)
            throw std::invalid_argument("EpsilonDomain: tiling the unit square requires unit cell lengths");
        cell.validate();
    }

    double epsilon() const { return 1.0 / n; }
    int cell_count() const { return n * n; }
};

} // namespace sighom
