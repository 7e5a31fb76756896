#pragma once

#include "sighom/coefficients.hpp"

#include <cmath>
#include <string>

namespace sighom {

/// Named closed-form sources, so configuration files can select f.
inline SourceFn make_source(const std::string& name, double amplitude = 1.0) {
    constexpr double pi = 3.14159265358979323846;
    if (name == "zero") return [](double, double) { return 0.0; };
    if (name == "constant") return [amplitude](double, double) { return amplitude; };
    if (name == "sin_pi_xy")
        return [amplitude, pi](double x, double y) { return amplitude * std::sin(pi * x) * std::sin(pi * y); };
    if (name == "manufactured_pi") // -lap u = f with u = sin(pi x) sin(pi y)
        return [amplitude, pi](double x, double y) {
            return amplitude * 2.0 * pi * pi * std::sin(pi * x) * std::sin(pi * y);
        };
    if (name == "sin_2pi_x")
        return [amplitude, pi](double x, double) { return amplitude * std::sin(2.0 * pi * x); };
    if (name == "sin_2pi_x_sin_pi_y")
        return [amplitude, pi](double x, double y) {
            return amplitude * std::sin(2.0 * pi * x) * std::sin(pi * y);
        };
    if (name == "bump") // smooth bump supported inside Omega
        return [amplitude](double x, double y) {
            double rx = 2 * x - 1, ry = 2 * y - 1;
            double r2 = rx * rx + ry * ry;
            return r2 < 1.0 ? amplitude * std::exp(-1.0 / (1.0 - r2)) * std::exp(1.0) : 0.0;
        };
    throw std::invalid_argument("make_source: unknown source '" + name + "'");
}

inline const char* source_names() {
    return "zero, constant, sin_pi_xy, manufactured_pi, sin_2pi_x, sin_2pi_x_sin_pi_y, bump";
}

} // namespace sighom
