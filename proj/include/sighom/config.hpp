#pragma once

#include "sighom/geometry.hpp"
#include "sighom/sources.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace sighom {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Whole-workbench configuration, parsed from a plain key-value file
/// ("key = value", '#' comments). Unknown keys are rejected by name; the
/// physical parameters are validated against the standing assumptions
/// (ellipticity, h > 0, gamma <= 1, eps = 1/n).
struct RunConfig {
    // geometry
    double cell_lx = 1.0, cell_ly = 1.0;
    bool has_inclusion = true;
    Frac incl_x0{1, 4}, incl_y0{1, 4}, incl_x1{3, 4}, incl_y1{3, 4};
    int per_cell_resolution = 8;
    int cell_resolution = 16;
    int homog_resolution = 64;
    // coefficients (symmetric 2x2: a11 a12 a22)
    double A1_11 = 1, A1_12 = 0, A1_22 = 1;
    double A2_11 = 1, A2_12 = 0, A2_22 = 1;
    double h_value = 1.0;
    // problem
    std::vector<double> gamma_list{-2.0, -1.0, 0.0, 1.0};
    std::vector<int> epsilon_list{4, 8, 16}; // eps = 1/n
    double gamma = 0.0;                       // cmd_solve
    int epsilon_n = 4;                        // cmd_solve
    std::string source = "sin_2pi_x_sin_pi_y";
    double source_amplitude = 1.0;
    std::string regime = "whole"; // cmd_cell: whole | perforated | vi
    // metrics
    int window_factor = 4; // H = window_factor * eps
    // solver knobs
    double psor_omega = 0.0; // 0 = auto (near-optimal SOR factor for the grid)
    double psor_tol = 1e-10;
    long psor_max_sweeps = 0; // 0 = default cap 2000 sqrt(n)
    double cg_rtol = 1e-12;
    int map_directions = 32;
    double nonlinear_tol = 1e-6;
    // output
    std::string out_dir = "out";
    int jobs = 1;
    unsigned seed = 0;

    CellGeometry cell() const {
        CellGeometry g;
        g.lx = cell_lx;
        g.ly = cell_ly;
        g.has_inclusion = has_inclusion;
        g.x0 = incl_x0; g.y0 = incl_y0; g.x1 = incl_x1; g.y1 = incl_y1;
        g.validate();
        return g;
    }
    CoefficientField coefficient() const {
        CoefficientField c;
        c.A1 << A1_11, A1_12, A1_12, A1_22;
        c.A2 << A2_11, A2_12, A2_12, A2_22;
        c.validate();
        return c;
    }
    InterfaceCoefficient interface() const { return InterfaceCoefficient::constant(h_value); }
    SourceFn source_fn() const { return make_source(source, source_amplitude); }

    void validate() const {
        try {
            cell();
            coefficient();
            interface();
            source_fn();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
        if (gamma > 1.0) throw ConfigError("config: gamma must satisfy gamma <= 1 (got " + std::to_string(gamma) + ")");
        for (double g : gamma_list)
            if (g > 1.0) throw ConfigError("config: gamma_list entries must satisfy gamma <= 1");
        if (epsilon_n <= 0) throw ConfigError("config: epsilon must be 1/n with positive integer n");
        for (int n : epsilon_list)
            if (n <= 0) throw ConfigError("config: epsilon_list entries must be 1/n with positive integer n");
        if (per_cell_resolution <= 0 || cell_resolution <= 0 || homog_resolution <= 0)
            throw ConfigError("config: resolutions must be positive");
        if (window_factor <= 0) throw ConfigError("config: window_factor must be positive");
        if (psor_omega != 0.0 && (psor_omega <= 0.0 || psor_omega >= 2.0))
            throw ConfigError("config: psor_omega must lie in (0,2), or 0 for auto");
        if (psor_tol <= 0 || cg_rtol <= 0 || nonlinear_tol <= 0)
            throw ConfigError("config: tolerances must be positive");
        if (map_directions < 16 || map_directions % 2 != 0)
            throw ConfigError("config: map_directions must be an even integer >= 16");
        if (jobs < 1) throw ConfigError("config: jobs must be >= 1");
        if (regime != "whole" && regime != "perforated" && regime != "vi")
            throw ConfigError("config: regime must be whole, perforated or vi");
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    auto e = s.find_last_not_of(" \t\r\n");
    return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    return out;
}

// "1/4" or "4" -> n with eps = 1/n
inline int parse_epsilon(const std::string& s) {
    Frac f = Frac::parse(s);
    if (f.num == 1 && f.den >= 1) return int(f.den);
    throw ConfigError("config: epsilon '" + s + "' is not the reciprocal of a positive integer");
}

} // namespace detail

inline RunConfig parse_config(std::istream& is) {
    RunConfig c;
    std::string line;
    int lineno = 0;
    auto number = [&](const std::string& v) {
        try { return std::stod(v); } catch (const std::logic_error&) {
            throw ConfigError("config line " + std::to_string(lineno) + ": bad number '" + v + "'");
        }
    };
    auto integer = [&](const std::string& v) {
        try { return std::stol(v); } catch (const std::logic_error&) {
            throw ConfigError("config line " + std::to_string(lineno) + ": bad integer '" + v + "'");
        }
    };
    while (std::getline(is, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = detail::trim(line.substr(0, eq));
        std::string val = detail::trim(line.substr(eq + 1));
        auto triple = [&](double& a, double& b, double& d) {
            auto parts = detail::split(val, ' ');
            parts.erase(std::remove(parts.begin(), parts.end(), ""), parts.end());
            if (parts.size() != 3)
                throw ConfigError("config line " + std::to_string(lineno) + ": expected 'a11 a12 a22'");
            a = number(parts[0]); b = number(parts[1]); d = number(parts[2]);
        };
        if (key == "cell_lengths") {
            auto parts = detail::split(val, ' ');
            parts.erase(std::remove(parts.begin(), parts.end(), ""), parts.end());
            if (parts.size() != 2) throw ConfigError("config line " + std::to_string(lineno) + ": expected 'lx ly'");
            c.cell_lx = number(parts[0]);
            c.cell_ly = number(parts[1]);
        } else if (key == "inclusion") {
            if (val == "none") {
                c.has_inclusion = false;
            } else {
                auto parts = detail::split(val, ' ');
                parts.erase(std::remove(parts.begin(), parts.end(), ""), parts.end());
                if (parts.size() != 4)
                    throw ConfigError("config line " + std::to_string(lineno) + ": expected 'x0 y0 x1 y1' fractions");
                c.has_inclusion = true;
                c.incl_x0 = Frac::parse(parts[0]);
                c.incl_y0 = Frac::parse(parts[1]);
                c.incl_x1 = Frac::parse(parts[2]);
                c.incl_y1 = Frac::parse(parts[3]);
            }
        } else if (key == "per_cell_resolution") c.per_cell_resolution = int(integer(val));
        else if (key == "cell_resolution") c.cell_resolution = int(integer(val));
        else if (key == "homog_resolution") c.homog_resolution = int(integer(val));
        else if (key == "A1") triple(c.A1_11, c.A1_12, c.A1_22);
        else if (key == "A2") triple(c.A2_11, c.A2_12, c.A2_22);
        else if (key == "h") c.h_value = number(val);
        else if (key == "gamma_list") {
            c.gamma_list.clear();
            for (const auto& g : detail::split(val, ',')) c.gamma_list.push_back(number(g));
        } else if (key == "epsilon_list") {
            c.epsilon_list.clear();
            for (const auto& e : detail::split(val, ',')) c.epsilon_list.push_back(detail::parse_epsilon(e));
        } else if (key == "gamma") c.gamma = number(val);
        else if (key == "epsilon") c.epsilon_n = detail::parse_epsilon(val);
        else if (key == "source") c.source = val;
        else if (key == "source_amplitude") c.source_amplitude = number(val);
        else if (key == "regime") c.regime = val;
        else if (key == "window_factor") c.window_factor = int(integer(val));
        else if (key == "psor_omega") c.psor_omega = val == "auto" ? 0.0 : number(val);
        else if (key == "psor_tol") c.psor_tol = number(val);
        else if (key == "psor_max_sweeps") c.psor_max_sweeps = integer(val);
        else if (key == "cg_rtol") c.cg_rtol = number(val);
        else if (key == "map_directions") c.map_directions = int(integer(val));
        else if (key == "nonlinear_tol") c.nonlinear_tol = number(val);
        else if (key == "out_dir") c.out_dir = val;
        else if (key == "jobs") c.jobs = int(integer(val));
        else if (key == "seed") c.seed = unsigned(integer(val));
        else
            throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    c.validate();
    return c;
}

inline std::string serialize_config(const RunConfig& c) {
    std::ostringstream os;
    char buf[256];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    os << "cell_lengths = " << num(c.cell_lx) << " " << num(c.cell_ly) << "\n";
    if (c.has_inclusion)
        os << "inclusion = " << c.incl_x0.str() << " " << c.incl_y0.str() << " " << c.incl_x1.str()
           << " " << c.incl_y1.str() << "\n";
    else
        os << "inclusion = none\n";
    os << "per_cell_resolution = " << c.per_cell_resolution << "\n";
    os << "cell_resolution = " << c.cell_resolution << "\n";
    os << "homog_resolution = " << c.homog_resolution << "\n";
    os << "A1 = " << num(c.A1_11) << " " << num(c.A1_12) << " " << num(c.A1_22) << "\n";
    os << "A2 = " << num(c.A2_11) << " " << num(c.A2_12) << " " << num(c.A2_22) << "\n";
    os << "h = " << num(c.h_value) << "\n";
    os << "gamma_list = ";
    for (size_t i = 0; i < c.gamma_list.size(); ++i) os << (i ? "," : "") << num(c.gamma_list[i]);
    os << "\n";
    os << "epsilon_list = ";
    for (size_t i = 0; i < c.epsilon_list.size(); ++i) os << (i ? "," : "") << "1/" << c.epsilon_list[i];
    os << "\n";
    os << "gamma = " << num(c.gamma) << "\n";
    os << "epsilon = 1/" << c.epsilon_n << "\n";
    os << "source = " << c.source << "\n";
    os << "source_amplitude = " << num(c.source_amplitude) << "\n";
    os << "regime = " << c.regime << "\n";
    os << "window_factor = " << c.window_factor << "\n";
    os << "psor_omega = " << (c.psor_omega == 0.0 ? std::string("auto") : num(c.psor_omega)) << "\n";
    os << "psor_tol = " << num(c.psor_tol) << "\n";
    os << "psor_max_sweeps = " << c.psor_max_sweeps << "\n";
    os << "cg_rtol = " << num(c.cg_rtol) << "\n";
    os << "map_directions = " << c.map_directions << "\n";
    os << "nonlinear_tol = " << num(c.nonlinear_tol) << "\n";
    os << "out_dir = " << c.out_dir << "\n";
    os << "jobs = " << c.jobs << "\n";
    os << "seed = " << c.seed << "\n";
    return os.str();
}

} // namespace sighom
